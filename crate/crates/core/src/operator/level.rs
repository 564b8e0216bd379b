//! Sampling spectra on phase level sets and midpoint convexity checks.

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{phase_bound, phase_of_spectrum, OperatorError, Spectrum};

/// Draws the free eigenvalues as `exp(U[log_low, log_high])` and closes the
/// last one on the requested level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSampler {
    pub log_low: f64,
    pub log_high: f64,
    pub max_retries: usize,
    /// Redraw when the solved eigenvalue exceeds this magnitude.
    pub max_abs_closing: f64,
}

impl Default for LevelSampler {
    fn default() -> Self {
        Self { log_low: -2.0, log_high: 3.0, max_retries: 10_000, max_abs_closing: 1e6 }
    }
}

/// Solves `arctan x = r` for `r ∈ (-π/2, π/2)`: `tan` followed by Newton
/// polishing on the monotone map `x ↦ arctan x - r`.
pub fn invert_arctan(r: f64) -> Option<f64> {
    if !(r.abs() < FRAC_PI_2) {
        return None;
    }
    let mut x = r.tan();
    for _ in 0..3 {
        let f = x.atan() - r;
        if f == 0.0 {
            break;
        }
        let step = f * (1.0 + x * x);
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x.is_finite().then_some(x)
}

/// Completes `free` (n-1 values) with the eigenvalue that puts the phase on
/// level `c`. Returns `None` when `c - Σ arctan free ∉ (-π/2, π/2)`.
pub fn complete_on_level(c: f64, free: &[f64]) -> Option<Spectrum> {
    let mut v = free.to_vec();
    v.push(closing_value(c, free)?);
    Some(Spectrum::new(v))
}

/// The value `x` with `arctan x = c - Σ arctan free`.
pub fn closing_value(c: f64, free: &[f64]) -> Option<f64> {
    invert_arctan(c - phase_of_spectrum(free))
}

impl LevelSampler {
    fn check_level(c: f64, n: usize) -> Result<(), OperatorError> {
        if n < 2 {
            return Err(OperatorError::InvalidInput("level sampling needs n >= 2".into()));
        }
        if !(c.abs() < phase_bound(n)) {
            return Err(OperatorError::PhaseOutOfRange { theta_min: c, theta_max: c, bound: phase_bound(n) });
        }
        Ok(())
    }

    /// One spectrum on `{Σ arctan λᵢ = c}` drawn from `rng`.
    pub fn sample_with<R: Rng>(&self, c: f64, n: usize, rng: &mut R) -> Result<Spectrum, OperatorError> {
        Self::check_level(c, n)?;
        let sign = if c < 0.0 { -1.0 } else { 1.0 };
        let mut free = vec![0.0; n - 1];
        for _ in 0..self.max_retries {
            for f in free.iter_mut() {
                *f = sign * rng.random_range(self.log_low..self.log_high).exp();
            }
            if let Some(s) = complete_on_level(c, &free) {
                let closing = s.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if closing <= self.max_abs_closing {
                    return Ok(s);
                }
            }
        }
        Err(OperatorError::SamplingExhausted { level: c, attempts: self.max_retries })
    }

    pub fn sample(&self, c: f64, n: usize, seed: u64) -> Result<Spectrum, OperatorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(c, n, &mut rng)
    }
}

/// Spectrum on the level `c` with default sampling parameters; deterministic
/// in `seed`.
pub fn sample_spectrum_on_level(c: f64, n: usize, seed: u64) -> Result<Spectrum, OperatorError> {
    LevelSampler::default().sample(c, n, seed)
}

/// `F(midpoint) - min(F(a), F(b))` on the convex side of the level. The
/// superlevel set is the convex side for `c ≥ 0`, the sublevel set for
/// `c < 0`. A pair with itself gives exactly zero.
pub fn midpoint_margin(a: &[f64], b: &[f64], c: f64) -> f64 {
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let fa = phase_of_spectrum(a);
    let fb = phase_of_spectrum(b);
    let fm = phase_of_spectrum(&mid);
    if c < 0.0 {
        fa.max(fb) - fm
    } else {
        fm - fa.min(fb)
    }
}

/// Minimum midpoint margin over `num_pairs` sampled pairs on the level `c`.
/// The second point of every pair is randomly permuted so that the check is
/// not restricted to equally ordered spectra.
pub fn check_level_set_convexity(c: f64, n: usize, num_pairs: usize, seed: u64) -> Result<f64, OperatorError> {
    let sampler = LevelSampler::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..num_pairs {
        let a = sampler.sample_with(c, n, &mut rng)?;
        let b = sampler.sample_with(c, n, &mut rng)?;
        let mut bv = b.values().to_vec();
        bv.shuffle(&mut rng);
        worst = worst.min(midpoint_margin(a.values(), &bv, c));
    }
    Ok(worst)
}

/// Result of the exhaustive lattice search for a midpoint convexity
/// violation.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexitySearch {
    pub min_margin: f64,
    pub pair: Option<(Vec<f64>, Vec<f64>)>,
    pub points: usize,
}

/// Enumerates the free coordinates over `values^(n-1)`, closes every tuple on
/// the level `c`, and evaluates the midpoint margin over all pairs of the
/// resulting points.
pub fn search_convexity_counterexample(c: f64, n: usize, values: &[f64]) -> Result<ConvexitySearch, OperatorError> {
    LevelSampler::check_level(c, n)?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut idx = vec![0usize; n - 1];
    'outer: loop {
        let free: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
        if let Some(last) = closing_value(c, &free) {
            if last.abs() <= 1e6 {
                let mut p = free;
                p.push(last);
                points.push(p);
            }
        }
        for d in 0..n - 1 {
            idx[d] += 1;
            if idx[d] < values.len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    let mut best = ConvexitySearch { min_margin: f64::INFINITY, pair: None, points: points.len() };
    for i in 0..points.len() {
        for j in i..points.len() {
            let m = midpoint_margin(&points[i], &points[j], c);
            if m < best.min_margin {
                best.min_margin = m;
                best.pair = Some((points[i].clone(), points[j].clone()));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{check_eigen_lemma, critical_phase};
    use std::f64::consts::PI;

    /// Bisection on the monotone map, independent of `invert_arctan`.
    fn bisect_arctan(r: f64) -> f64 {
        let (mut lo, mut hi): (f64, f64) = (-1e8, 1e8);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid.atan() < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn invert_arctan_matches_bisection() {
        for &r in &[-1.5, -0.7, 0.0, 0.3, 1.2, 1.5] {
            let x = invert_arctan(r).unwrap();
            let y = bisect_arctan(r);
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{r}: {x} vs {y}");
        }
        assert!(invert_arctan(FRAC_PI_2).is_none());
    }

    #[test]
    fn forced_draws() {
        let s = complete_on_level(3.0 * PI / 4.0, &[1.0, 1.0]).unwrap();
        for v in s.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let s = complete_on_level(0.0, &[1.0, 0.5]).unwrap();
        let want = (-(1.0f64).atan() - 0.5f64.atan()).tan();
        assert!((s.smallest() - want).abs() < 1e-12);
        assert!((s.smallest() + 3.0).abs() < 1e-12);
        assert!(complete_on_level(PI, &[10.0, 0.01]).is_none());
    }

    #[test]
    fn sampled_spectra_lie_on_level_and_satisfy_lemma() {
        let c = PI / 2.0;
        for seed in 0..200 {
            let s = sample_spectrum_on_level(c, 3, seed).unwrap();
            assert!((phase_of_spectrum(s.values()) - c).abs() < 1e-10);
            assert!(check_eigen_lemma(&s, c, 3, 1e-10).unwrap().all_hold());
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_spectrum_on_level(critical_phase(4) + 0.2, 4, 99).unwrap();
        let b = sample_spectrum_on_level(critical_phase(4) + 0.2, 4, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_exhausts_on_unreachable_level() {
        // Free coordinates near e^3 put Σ arctan ≈ 2.95 > π/2, so level 0 is unreachable.
        let s = LevelSampler { log_low: 3.0, log_high: 3.1, max_retries: 50, max_abs_closing: 1e6 };
        let r = s.sample(0.0, 3, 1);
        assert!(matches!(r, Err(OperatorError::SamplingExhausted { .. })));
    }

    #[test]
    fn self_pair_margin_is_zero() {
        let s = sample_spectrum_on_level(PI / 2.0, 3, 5).unwrap();
        assert_eq!(midpoint_margin(s.values(), s.values(), PI / 2.0), 0.0);
    }

    #[test]
    fn convexity_holds_at_critical_level() {
        let m = check_level_set_convexity(PI / 2.0, 3, 2000, 11).unwrap();
        assert!(m >= -1e-10, "{m}");
    }

    #[test]
    fn convexity_fails_at_zero_level_n3() {
        let m = check_level_set_convexity(0.0, 3, 2000, 3).unwrap();
        assert!(m < 0.0);
        let lattice: Vec<f64> = (-6..=6).map(|k| k as f64 * 0.5).collect();
        let s = search_convexity_counterexample(0.0, 3, &lattice).unwrap();
        assert!(s.min_margin < -1e-3, "{}", s.min_margin);
        let s = search_convexity_counterexample(PI / 2.0, 3, &lattice).unwrap();
        assert!(s.min_margin >= -1e-10, "{}", s.min_margin);
    }
}
