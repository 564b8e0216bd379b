//! Induced geometry of the gradient graph `X = (x, Du(x)) ⊂ ℝⁿ × ℝⁿ`.
//!
//! Everything here is pointwise in the local Hessian `M = D²u` (and `∇θ`
//! where the mean curvature enters); nothing is cached between points.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::operator::{OperatorError, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// `g = I + M²`, its inverse and the volume density `√det g`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMetric {
    pub g: SymMatrix,
    pub g_inv: SymMatrix,
    pub vol_density: f64,
}

pub fn induced_metric(m: &SymMatrix) -> Result<InducedMetric, GeometryError> {
    if !m.is_finite() {
        return Err(OperatorError::InvalidInput("matrix has non-finite entries".into()).into());
    }
    let n = m.dim();
    let a = m.to_dmatrix();
    let g = DMatrix::identity(n, n) + &a * &a;
    // g ≥ I, so the factorization cannot fail for finite input
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| OperatorError::InvalidInput("I + M^2 not positive definite".into()))?;
    let vol_density = chol.l().diagonal().iter().product::<f64>();
    Ok(InducedMetric {
        g: SymMatrix::from_dmatrix(&g),
        g_inv: SymMatrix::from_dmatrix(&chol.inverse()),
        vol_density,
    })
}

fn check_len(g_inv: &SymMatrix, v: &[f64]) -> Result<(), GeometryError> {
    if v.len() != g_inv.dim() {
        return Err(GeometryError::DimensionMismatch { expected: g_inv.dim(), found: v.len() });
    }
    Ok(())
}

/// `⟨∇_g v, ∇_g w⟩_g = Σ g^{ij} vᵢ wⱼ`.
pub fn metric_inner(g_inv: &SymMatrix, v: &[f64], w: &[f64]) -> Result<f64, GeometryError> {
    check_len(g_inv, v)?;
    check_len(g_inv, w)?;
    let n = g_inv.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g_inv.get(i, j) * v[i] * w[j];
        }
    }
    Ok(s)
}

/// Coefficients of `Δ_g = Σ g^{ij}∂ᵢⱼ − Σ g^{jp}θ_q u_{pq} ∂ⱼ`: the
/// second-order part `g^{-1}` and the first-order vector
/// `first[j] = Σ_{p,q} g^{jp} θ_q M_{pq}`.
pub fn laplace_beltrami_coeffs(m: &SymMatrix, dtheta: &[f64]) -> Result<(SymMatrix, Vec<f64>), GeometryError> {
    let n = m.dim();
    if dtheta.len() != n {
        return Err(GeometryError::DimensionMismatch { expected: n, found: dtheta.len() });
    }
    let metric = induced_metric(m)?;
    let m_theta: Vec<f64> = (0..n).map(|p| (0..n).map(|q| m.get(p, q) * dtheta[q]).sum()).collect();
    let first = (0..n)
        .map(|j| (0..n).map(|p| metric.g_inv.get(j, p) * m_theta[p]).sum())
        .collect();
    Ok((metric.g_inv, first))
}

/// `|H| = |∇_g θ|_g`; the complex structure is an isometry so this is the
/// length of the mean curvature vector.
pub fn mean_curvature_norm(m: &SymMatrix, dtheta: &[f64]) -> Result<f64, GeometryError> {
    let metric = induced_metric(m)?;
    Ok(metric_inner(&metric.g_inv, dtheta, dtheta)?.max(0.0).sqrt())
}
