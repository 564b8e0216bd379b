//! Pointwise and integral Jacobi inequalities for `b = ln λ₁`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DiagnosticsError, ProbeConfig};
use crate::geometry::{induced_metric, metric_inner};
use crate::grid::{GridProblem, NodeClass};
use crate::operator::Spectrum;

pub(crate) fn eigen_field(p: &GridProblem, u: &[f64]) -> Result<Vec<(Spectrum, DMatrix<f64>)>, DiagnosticsError> {
    p.check_field(u)?;
    (0..p.len())
        .into_par_iter()
        .map(|i| {
            p.hessian_of(u, i)
                .eigen()
                .map_err(|source| crate::grid::GridError::Operator { node: i, source }.into())
        })
        .collect()
}

/// Why a node was left out of the pointwise probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Stencil reaches ∂Ω, so `b` cannot be differenced on unknowns alone.
    BoundaryAdjacent,
    BelowThreshold,
    /// `λ₁ − λ₂` below the gap gate.
    SmallGap,
    /// `λ₁ ≤ 0` somewhere in the stencil, so `ln λ₁` is undefined there.
    UndefinedNeighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiNode {
    pub node: usize,
    pub lambda1: f64,
    /// `Σ F^{ii} b_ii`
    pub lhs: f64,
    /// `Σ F^{ii} b_i²`
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiPointwise {
    pub nodes: Vec<JacobiNode>,
    pub excluded: Vec<(usize, Exclusion)>,
    pub min_margin: Option<f64>,
    pub argmin_node: Option<usize>,
    pub violating: Vec<usize>,
}

/// `b = ln λ₁` at each node, `NaN` where `λ₁ ≤ 0`.
fn log_lambda1(eig: &[(Spectrum, DMatrix<f64>)]) -> Vec<f64> {
    eig.iter().map(|(s, _)| if s.largest() > 0.0 { s.largest().ln() } else { f64::NAN }).collect()
}

/// At each interior node with `λ₁ ≥ Λ` and `λ₁ − λ₂ ≥ gap`, differences
/// `b = ln λ₁` on the lattice, rotates into the eigenframe of `D²ₕu` and
/// reports `Σ F^{ii} b_ii − c Σ F^{ii} b_i² + C` with `F^{ii} = 1/(1 + λᵢ²)`.
pub fn jacobi_pointwise_probe(p: &GridProblem, u: &[f64], cfg: &ProbeConfig) -> Result<JacobiPointwise, DiagnosticsError> {
    let n = p.dim();
    let eig = eigen_field(p, u)?;
    let b = log_lambda1(&eig);
    let results: Vec<Result<JacobiNode, Exclusion>> = (0..p.len())
        .into_par_iter()
        .map(|i| {
            let (s, q) = &eig[i];
            let l = s.values();
            if p.node(i).class != NodeClass::Interior {
                return Err(Exclusion::BoundaryAdjacent);
            }
            if l[0] < cfg.lambda1_threshold {
                return Err(Exclusion::BelowThreshold);
            }
            if l[0] - l[1] < cfg.gap_gate {
                return Err(Exclusion::SmallGap);
            }
            let st = p.stencil(i);
            if st.footprint().iter().any(|&j| !b[j].is_finite()) {
                return Err(Exclusion::UndefinedNeighbor);
            }
            let grad: Vec<f64> = st.grad.iter().map(|f| f.eval_homogeneous(&b, i)).collect();
            let hess = SymHess::new(n, st.hess.iter().map(|f| f.eval_homogeneous(&b, i)).collect());
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for k in 0..n {
                let fk = 1.0 / (1.0 + l[k] * l[k]);
                let bk: f64 = (0..n).map(|r| q[(r, k)] * grad[r]).sum();
                let bkk: f64 = (0..n).map(|r| (0..n).map(|c| q[(r, k)] * hess.get(r, c) * q[(c, k)]).sum::<f64>()).sum();
                lhs += fk * bkk;
                rhs += fk * bk * bk;
            }
            let margin = lhs - cfg.jacobi_c * rhs + cfg.jacobi_big_c;
            Ok(JacobiNode { node: i, lambda1: l[0], lhs, rhs, margin })
        })
        .collect();
    let mut out = JacobiPointwise { nodes: Vec::new(), excluded: Vec::new(), min_margin: None, argmin_node: None, violating: Vec::new() };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(nd) => {
                if out.min_margin.is_none_or(|m| nd.margin < m) {
                    out.min_margin = Some(nd.margin);
                    out.argmin_node = Some(i);
                }
                if nd.margin < -cfg.margin_tol {
                    out.violating.push(i);
                }
                out.nodes.push(nd);
            }
            Err(e) => out.excluded.push((i, e)),
        }
    }
    Ok(out)
}

struct SymHess {
    n: usize,
    packed: Vec<f64>,
}

impl SymHess {
    fn new(n: usize, packed: Vec<f64>) -> Self {
        Self { n, packed }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[crate::grid::packed_index(self.n, i, j)]
    }
}

/// Quartic bump `(1 − |x − x₀|²/ρ²)²₊`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    pub fn value(&self, x: &[f64]) -> f64 {
        let t = 1.0 - self.r2(x) / (self.radius * self.radius);
        if t > 0.0 {
            t * t
        } else {
            0.0
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let rho2 = self.radius * self.radius;
        let t = 1.0 - self.r2(x) / rho2;
        if t <= 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter().zip(&self.center).map(|(xi, ci)| -4.0 * t * (xi - ci) / rho2).collect()
    }

    fn r2(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiIntegral {
    /// `−∫⟨∇_g φ, ∇_g b⟩_g dv_g`
    pub lhs: f64,
    /// `∫ φ |∇_g b|² dv_g`
    pub t1: f64,
    /// `∫ φ dv_g`
    pub t2: f64,
    pub margin: f64,
    pub quadrature_nodes: usize,
}

/// Integral Jacobi margin `LHS − c·T1 + C·T2` with `b = ln max{Λ, λ₁}`, by
/// the midpoint rule on the lattice cells centred at the nodes.
pub fn jacobi_integral_probe(p: &GridProblem, u: &[f64], bump: &Bump, cfg: &ProbeConfig) -> Result<JacobiIntegral, DiagnosticsError> {
    let n = p.dim();
    if bump.center.len() != n || !(bump.radius > 0.0) {
        return Err(DiagnosticsError::InvalidBump("bump center dimension or radius invalid".into()));
    }
    let h = p.h();
    if !p.domain().contains(&bump.center) || p.domain().distance_to_boundary(&bump.center) < bump.radius + 2.0 * h {
        return Err(DiagnosticsError::InvalidBump(format!(
            "support of radius {} around {:?} is not inside the interior nodes",
            bump.radius, bump.center
        )));
    }
    let eig = eigen_field(p, u)?;
    let b: Vec<f64> = eig.iter().map(|(s, _)| s.largest().max(cfg.lambda1_threshold).ln()).collect();
    let cell = h.powi(n as i32);
    let terms: Vec<Option<(f64, f64, f64)>> = (0..p.len())
        .into_par_iter()
        .map(|i| {
            let x = &p.node(i).x;
            let phi = bump.value(x);
            if phi <= 0.0 {
                return Ok(None);
            }
            let st = p.stencil(i);
            let db: Vec<f64> = st.grad.iter().map(|f| f.eval_homogeneous(&b, i)).collect();
            let met = induced_metric(&p.hessian_of(u, i))?;
            let dphi = bump.gradient(x);
            let w = met.vol_density * cell;
            let lhs = -metric_inner(&met.g_inv, &dphi, &db)? * w;
            let t1 = phi * metric_inner(&met.g_inv, &db, &db)? * w;
            Ok(Some((lhs, t1, phi * w)))
        })
        .collect::<Result<_, DiagnosticsError>>()?;
    let (mut lhs, mut t1, mut t2, mut count) = (0.0, 0.0, 0.0, 0);
    for (a, b1, c) in terms.into_iter().flatten() {
        lhs += a;
        t1 += b1;
        t2 += c;
        count += 1;
    }
    let margin = lhs - cfg.jacobi_c * t1 + cfg.jacobi_big_c * t2;
    Ok(JacobiIntegral { lhs, t1, t2, margin, quadrature_nodes: count })
}
