//! Seeded randomized checks of the operator identities. Shared by the
//! `verify-lemmas` command and the acceptance tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_eigen_lemma, check_level_set_convexity, phase_gradient, phase_hessian_diag_frame, phase_of, LevelSampler,
    OperatorError, Spectrum, SymMatrix,
};

/// Outcome of one randomized suite. `worst` is an error for the
/// finite-difference and invariance suites and a margin for the lemma and
/// convexity suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub n: usize,
    pub cases: usize,
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl SuiteOutcome {
    fn error(name: &str, n: usize, cases: usize, worst: f64, threshold: f64) -> Self {
        Self { name: name.into(), n, cases, worst, threshold, passed: worst <= threshold }
    }

    fn margin(name: &str, n: usize, cases: usize, worst: f64, threshold: f64) -> Self {
        Self { name: name.into(), n, cases, worst, threshold, passed: worst >= threshold }
    }
}

/// Symmetric matrix with entries uniform in `[-scale, scale]`.
pub fn random_symmetric<R: Rng>(n: usize, scale: f64, rng: &mut R) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set(i, j, rng.random_range(-scale..scale));
        }
    }
    m
}

/// Orthogonal factor of a random square matrix, with column signs fixed so
/// that the triangular factor has a positive diagonal.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let qr = a.qr();
        let r = qr.r();
        if (0..n).any(|i| f64::abs(r[(i, i)]) < 1e-3) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        return q;
    }
}

/// Worst `|F(QMQᵀ) − F(M)|` over random matrices and rotations.
pub fn orthogonal_invariance(n: usize, cases: usize, seed: u64) -> Result<SuiteOutcome, OperatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let m = random_symmetric(n, 3.0, &mut rng);
        let q = random_orthogonal(n, &mut rng);
        worst = worst.max((phase_of(&m.conjugate(&q))? - phase_of(&m)?).abs());
    }
    Ok(SuiteOutcome::error("orthogonal_invariance", n, cases, worst, 1e-10))
}

/// `DF` against central differences of `F` along each symmetric entry
/// direction. The error is `|fd − exact| / max(1, |exact|)`.
pub fn gradient_fd_check(n: usize, cases: usize, seed: u64) -> Result<SuiteOutcome, OperatorError> {
    const STEP: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let m = random_symmetric(n, 3.0, &mut rng);
        let df = phase_gradient(&m)?;
        for i in 0..n {
            for j in i..n {
                let mut plus = m.clone();
                let mut minus = m.clone();
                plus.set(i, j, m.get(i, j) + STEP);
                minus.set(i, j, m.get(i, j) - STEP);
                let fd = (phase_of(&plus)? - phase_of(&minus)?) / (2.0 * STEP);
                // moving u_ij moves u_ji too
                let exact = if i == j { df.get(i, i) } else { 2.0 * df.get(i, j) };
                worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    Ok(SuiteOutcome::error("phase_gradient_fd", n, cases, worst, 1e-6))
}

/// `Σ F^{pq,rs} A_pq B_rs` at a random diagonal matrix against the mixed
/// second difference of `F` along random symmetric directions `A`, `B`.
pub fn hessian_fd_check(n: usize, cases: usize, seed: u64) -> Result<SuiteOutcome, OperatorError> {
    const STEP: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < cases {
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = Spectrum::new(values);
        if s.values().windows(2).any(|w| (w[0] - w[1]).abs() < 1e-3) {
            continue;
        }
        let table = phase_hessian_diag_frame(&s)?;
        let d = s.to_diag_matrix();
        let a = random_symmetric(n, 1.0, &mut rng);
        let b = random_symmetric(n, 1.0, &mut rng);
        let at = |sa: f64, sb: f64| phase_of(&d.add(&a.scaled(sa * STEP)).add(&b.scaled(sb * STEP)));
        let fd = (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * STEP * STEP);
        let exact = table.contract(&a, &b);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
        done += 1;
    }
    Ok(SuiteOutcome::error("phase_hessian_fd", n, cases, worst, 1e-6))
}

/// Worst margin of the four spectral assertions over `count` spectra drawn
/// on the level `c`. Sampler exhaustion is passed through.
pub fn eigen_lemma_suite(n: usize, c: f64, count: usize, seed: u64, sampler: &LevelSampler) -> Result<SuiteOutcome, OperatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let s = sampler.sample_with(c, n, &mut rng)?;
        worst = worst.min(check_eigen_lemma(&s, c, n, 1e-10)?.worst_margin());
    }
    Ok(SuiteOutcome::margin(&format!("eigen_lemma(c={c:.4})"), n, count, worst, -1e-10))
}

/// Worst midpoint margin over `count` random pairs on the level `c`.
pub fn convexity_suite(n: usize, c: f64, count: usize, seed: u64) -> Result<SuiteOutcome, OperatorError> {
    let worst = check_level_set_convexity(c, n, count, seed)?;
    Ok(SuiteOutcome::margin(&format!("level_convexity(c={c:.4})"), n, count, worst, -1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::critical_phase;

    #[test]
    fn rotations_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            let q = random_orthogonal(n, &mut rng);
            let err = (q.transpose() * &q - DMatrix::identity(n, n)).abs().max();
            assert!(err < 1e-14);
        }
    }

    #[test]
    fn suites_pass_on_small_counts() {
        for n in 2..=4 {
            assert!(orthogonal_invariance(n, 50, 1).unwrap().passed);
            assert!(gradient_fd_check(n, 50, 2).unwrap().passed);
            let h = hessian_fd_check(n, 50, 3).unwrap();
            assert!(h.passed, "{h:?}");
        }
        for n in 3..=4 {
            let c = critical_phase(n);
            assert!(eigen_lemma_suite(n, c, 200, 4, &LevelSampler::default()).unwrap().passed);
            assert!(eigen_lemma_suite(n, c + 0.2, 200, 5, &LevelSampler::default()).unwrap().passed);
            assert!(convexity_suite(n, c, 200, 6).unwrap().passed);
        }
    }

    #[test]
    fn suites_are_seed_deterministic() {
        assert_eq!(hessian_fd_check(3, 20, 9).unwrap(), hessian_fd_check(3, 20, 9).unwrap());
        assert_eq!(eigen_lemma_suite(3, 1.7, 20, 9, &LevelSampler::default()).unwrap(), eigen_lemma_suite(3, 1.7, 20, 9, &LevelSampler::default()).unwrap());
    }
}
