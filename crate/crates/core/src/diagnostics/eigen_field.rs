use serde::{Deserialize, Serialize};

use super::jacobi::eigen_field;
use super::DiagnosticsError;
use crate::grid::GridProblem;
use crate::operator::{check_eigen_lemma, critical_phase, phase_of_spectrum};

/// Fieldwise spectral structure check on the nodes whose phase is critical
/// or above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenFieldReport {
    pub applicable_nodes: usize,
    pub not_applicable_nodes: usize,
    /// Worst value of each margin `[λₙ₋₁, λₙ₋₁ − |λₙ|, λ₁ + (n−1)λₙ, σ₁ … σₙ₋₁]`.
    pub worst_margins: Vec<f64>,
    pub worst_nodes: Vec<usize>,
    pub min_margin: Option<f64>,
    pub argmin_node: Option<usize>,
    pub lambda1_max: f64,
    pub lambdan_min: f64,
}

/// Margins are evaluated on the level of each node's own discrete spectrum,
/// so a small residual does not trip the consistency check.
pub fn eigen_field_report(p: &GridProblem, u: &[f64], tol: f64) -> Result<EigenFieldReport, DiagnosticsError> {
    let n = p.dim();
    let crit = critical_phase(n);
    let eig = eigen_field(p, u)?;
    let mut r = EigenFieldReport {
        applicable_nodes: 0,
        not_applicable_nodes: 0,
        worst_margins: vec![f64::INFINITY; n + 2],
        worst_nodes: vec![0; n + 2],
        min_margin: None,
        argmin_node: None,
        lambda1_max: f64::NEG_INFINITY,
        lambdan_min: f64::INFINITY,
    };
    for (i, (s, _)) in eig.iter().enumerate() {
        r.lambda1_max = r.lambda1_max.max(s.largest());
        r.lambdan_min = r.lambdan_min.min(s.smallest());
        let level = phase_of_spectrum(s.values());
        if p.theta_at(i, u[i]) < crit || level < crit - tol {
            r.not_applicable_nodes += 1;
            continue;
        }
        let rep = check_eigen_lemma(s, level.max(crit), n, tol).map_err(|source| crate::grid::GridError::Operator { node: i, source })?;
        r.applicable_nodes += 1;
        for (k, &m) in rep.margins.iter().enumerate() {
            if m < r.worst_margins[k] {
                r.worst_margins[k] = m;
                r.worst_nodes[k] = i;
            }
            if r.min_margin.is_none_or(|w| m < w) {
                r.min_margin = Some(m);
                r.argmin_node = Some(i);
            }
        }
    }
    Ok(r)
}
