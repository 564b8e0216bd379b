use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{OperatorError, Spectrum, SymMatrix};

/// Eigenvalue gap below which the divided-difference second derivative is
/// refused.
pub const DEGENERATE_GAP: f64 = 1e-8;

/// `(n-2)π/2`, the phase magnitude separating sub- from supercritical.
#[inline]
pub fn critical_phase(n: usize) -> f64 {
    (n as f64 - 2.0) * FRAC_PI_2
}

/// `nπ/2`, the open bound of the operator range.
#[inline]
pub fn phase_bound(n: usize) -> f64 {
    n as f64 * FRAC_PI_2
}

/// `Σ arctan λᵢ` for an already computed set of eigenvalues.
pub fn phase_of_spectrum(values: &[f64]) -> f64 {
    values.iter().map(|l| l.atan()).sum()
}

/// Lagrangian phase `F(M) = Σ arctan λᵢ(M)`.
pub fn phase_of(m: &SymMatrix) -> Result<f64, OperatorError> {
    let s = m.spectrum()?;
    Ok(phase_of_spectrum(s.values()))
}

/// `DF(M) = (I + M²)⁻¹`, the derivative of the phase with respect to the
/// matrix entries. Always symmetric positive definite with spectrum in (0, 1].
pub fn phase_gradient(m: &SymMatrix) -> Result<SymMatrix, OperatorError> {
    m.check_finite()?;
    let a = m.to_dmatrix();
    let g = DMatrix::identity(m.dim(), m.dim()) + &a * &a;
    let chol = g
        .cholesky()
        .ok_or_else(|| OperatorError::InvalidInput("I + M^2 not positive definite".into()))?;
    Ok(SymMatrix::from_dmatrix(&chol.inverse()))
}

/// Second derivatives `F^{ij,kl}` at a diagonal matrix, indexed as if the
/// entries `u_ij` and `u_ji` were independent variables.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianTable {
    n: usize,
    data: Vec<f64>,
}

impl HessianTable {
    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    /// Bilinear form `Σ F^{pq,rs} A_pq B_rs`.
    pub fn contract(&self, a: &SymMatrix, b: &SymMatrix) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                for r in 0..n {
                    for t in 0..n {
                        s += self.get(p, q, r, t) * apq * b.get(r, t);
                    }
                }
            }
        }
        s
    }
}

/// `F^{ij,kl}` at `diag(S)`.
///
/// Repeated eigenvalues (gap below [`DEGENERATE_GAP`]) are rejected: the
/// off-diagonal entries are divided differences that have no pointwise
/// meaning there.
pub fn phase_hessian_diag_frame(s: &Spectrum) -> Result<HessianTable, OperatorError> {
    let v = s.values();
    let n = v.len();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(OperatorError::InvalidInput("spectrum has non-finite values".into()));
    }
    for w in v.windows(2) {
        if (w[0] - w[1]).abs() < DEGENERATE_GAP {
            return Err(OperatorError::DegenerateSpectrum { gap: (w[0] - w[1]).abs() });
        }
    }
    let mut table = HessianTable { n, data: vec![0.0; n * n * n * n] };
    for i in 0..n {
        let fi = 1.0 / (1.0 + v[i] * v[i]);
        let k = table.idx(i, i, i, i);
        table.data[k] = -2.0 * v[i] * fi * fi;
        for j in 0..n {
            if i == j {
                continue;
            }
            let fj = 1.0 / (1.0 + v[j] * v[j]);
            let k = table.idx(i, j, j, i);
            table.data[k] = -(v[i] + v[j]) * fi * fj;
        }
    }
    Ok(table)
}

/// Phase regime relative to the critical threshold `(n-2)π/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseClass {
    Subcritical,
    Critical,
    Supercritical,
    Mixed,
}

impl PhaseClass {
    /// Critical or supercritical: the regime covered by the existence theory
    /// and the Jacobi and eigenvalue lemmas.
    pub fn is_critical_or_above(self) -> bool {
        matches!(self, PhaseClass::Critical | PhaseClass::Supercritical)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseClass::Subcritical => "subcritical",
            PhaseClass::Critical => "critical",
            PhaseClass::Supercritical => "supercritical",
            PhaseClass::Mixed => "mixed",
        }
    }
}

impl fmt::Display for PhaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies the phase range `[theta_min, theta_max]` through the range of
/// `|θ|` it implies.
pub fn classify_phase(theta_min: f64, theta_max: f64, n: usize) -> Result<PhaseClass, OperatorError> {
    let bound = phase_bound(n);
    if !(theta_min.is_finite() && theta_max.is_finite()) || theta_min > theta_max {
        return Err(OperatorError::InvalidInput(format!(
            "invalid phase range [{theta_min}, {theta_max}]"
        )));
    }
    if theta_min <= -bound || theta_max >= bound {
        return Err(OperatorError::PhaseOutOfRange { theta_min, theta_max, bound });
    }
    let abs_inf = if theta_min <= 0.0 && theta_max >= 0.0 {
        0.0
    } else {
        theta_min.abs().min(theta_max.abs())
    };
    let abs_sup = theta_min.abs().max(theta_max.abs());
    let crit = critical_phase(n);
    let tol = 1e-12 * crit.abs().max(1.0);
    Ok(if abs_inf > crit + tol {
        PhaseClass::Supercritical
    } else if (abs_inf - crit).abs() <= tol {
        PhaseClass::Critical
    } else if abs_sup < crit - tol {
        PhaseClass::Subcritical
    } else {
        PhaseClass::Mixed
    })
}
