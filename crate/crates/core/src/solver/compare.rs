use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::grid::{GridProblem, NodeClass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub holds: bool,
    /// `max (u_b − u_a)`; the ordering asks for this to be at most `tol`.
    pub max_violation: f64,
    pub argmax_node: usize,
}

fn same_grid(a: &GridProblem, b: &GridProblem) -> Result<(), SolverError> {
    if a.dim() != b.dim() || a.len() != b.len() || a.h() != b.h() || a.domain() != b.domain() {
        return Err(SolverError::GridMismatch("grids differ".into()));
    }
    Ok(())
}

/// Checks the reverse ordering `u_b ≤ u_a + tol` for phases `θ_a ≤ θ_b`
/// with shared boundary data.
pub fn comparison_check(
    pa: &GridProblem,
    pb: &GridProblem,
    ua: &[f64],
    ub: &[f64],
    tol: f64,
) -> Result<ComparisonResult, SolverError> {
    same_grid(pa, pb)?;
    if ua.len() != pa.len() || ub.len() != pb.len() {
        return Err(SolverError::GridMismatch("field length differs from grid".into()));
    }
    for i in 0..pa.len() {
        if pa.theta_at(i, ua[i]) > pb.theta_at(i, ub[i]) {
            return Err(SolverError::GridMismatch(format!("phases not ordered at node {i}")));
        }
    }
    let (argmax_node, max_violation) = ua
        .iter()
        .zip(ub)
        .map(|(a, b)| b - a)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(ComparisonResult { holds: max_violation <= tol, max_violation, argmax_node })
}

/// Difference-quotient maxima `|u(x + h e_j) − u(x)|/h` over pairs of
/// neighboring unknowns, split by whether both nodes are interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub axis: usize,
    pub interior_max: f64,
    pub boundary_max: f64,
    pub interior_pairs: usize,
    pub boundary_pairs: usize,
}

pub fn translation_lipschitz_probe(p: &GridProblem, u: &[f64], axis: usize) -> Result<LipschitzProbe, SolverError> {
    if axis >= p.dim() || u.len() != p.len() {
        return Err(SolverError::GridMismatch("axis or field length out of range".into()));
    }
    let h = p.h();
    let mut out = LipschitzProbe { axis, interior_max: 0.0, boundary_max: 0.0, interior_pairs: 0, boundary_pairs: 0 };
    for i in 0..p.len() {
        let Some(j) = p.neighbor(i, axis, true) else { continue };
        let q = (u[j] - u[i]).abs() / h;
        if p.node(i).class == NodeClass::Interior && p.node(j).class == NodeClass::Interior {
            out.interior_max = out.interior_max.max(q);
            out.interior_pairs += 1;
        } else {
            out.boundary_max = out.boundary_max.max(q);
            out.boundary_pairs += 1;
        }
    }
    if out.interior_pairs + out.boundary_pairs == 0 {
        return Err(SolverError::GridMismatch("empty overlap region".into()));
    }
    Ok(out)
}
