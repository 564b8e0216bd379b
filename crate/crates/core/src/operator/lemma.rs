//! Structure of spectra on critical and supercritical level sets.
//!
//! For `λ₁ ≥ … ≥ λₙ` with `Σ arctan λᵢ = θ ≥ (n-2)π/2` the following hold:
//! `λₙ₋₁ > 0`, `λₙ₋₁ ≥ |λₙ|`, `λ₁ + (n-1)λₙ ≥ 0` and `σₖ(λ) ≥ 0` for
//! `k = 1, …, n-1`. [`check_eigen_lemma`] evaluates each of these with a
//! signed margin so that near-violations are visible.

use serde::{Deserialize, Serialize};

use super::{critical_phase, phase_of_spectrum, OperatorError, Spectrum};

/// Elementary symmetric polynomials `e₀ … eₙ` of `values`, built by the
/// left-to-right update `eₖ ← eₖ + x·eₖ₋₁`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (m, &x) in values.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenLemmaReport {
    /// `λₙ₋₁ > 0`
    pub lambda_positive_head: bool,
    /// `λₙ₋₁ ≥ |λₙ|`
    pub tail_domination: bool,
    /// `λ₁ + (n-1)λₙ ≥ 0`
    pub trace_bound: bool,
    /// `σₖ ≥ 0` for `k = 1 … n-1`
    pub sigma_nonneg: Vec<bool>,
    /// `[λₙ₋₁, λₙ₋₁ - |λₙ|, λ₁ + (n-1)λₙ, σ₁, …, σₙ₋₁]`
    pub margins: Vec<f64>,
}

impl EigenLemmaReport {
    pub fn all_hold(&self) -> bool {
        self.lambda_positive_head
            && self.tail_domination
            && self.trace_bound
            && self.sigma_nonneg.iter().all(|&b| b)
    }

    pub fn worst_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates the four spectral assertions for a spectrum lying on the level
/// `theta`. Each assertion counts as holding when its margin is `≥ -tol`.
pub fn check_eigen_lemma(s: &Spectrum, theta: f64, n: usize, tol: f64) -> Result<EigenLemmaReport, OperatorError> {
    let v = s.values();
    if v.len() != n {
        return Err(OperatorError::DimensionMismatch { expected: n, found: v.len() });
    }
    if n < 2 {
        return Err(OperatorError::InvalidInput("eigenvalue lemma needs n >= 2".into()));
    }
    let phase = phase_of_spectrum(v);
    if (phase - theta).abs() > tol {
        return Err(OperatorError::InconsistentInput { phase, theta, tol });
    }
    let crit = critical_phase(n);
    if theta < crit - tol {
        return Err(OperatorError::OutsideRegime { theta, critical: crit });
    }

    let head = v[n - 2];
    let tail = v[n - 1];
    let sigma = elementary_symmetric(v);
    let mut margins = vec![head, head - tail.abs(), v[0] + (n as f64 - 1.0) * tail];
    margins.extend_from_slice(&sigma[1..n]);
    let ok = |m: f64| m >= -tol;
    Ok(EigenLemmaReport {
        lambda_positive_head: ok(margins[0]),
        tail_domination: ok(margins[1]),
        trace_bound: ok(margins[2]),
        sigma_nonneg: margins[3..].iter().map(|&m| ok(m)).collect(),
        margins,
    })
}
