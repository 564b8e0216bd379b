use serde::{Deserialize, Serialize};

use super::GridError;

/// Shape of Ω. All shapes are centered at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// `Π [-aᵢ, aᵢ]`
    Box { half_widths: Vec<f64> },
    Ball { radius: f64 },
    /// `Σ (xᵢ/aᵢ)² < 1`
    Ellipsoid { semi_axes: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub dim: usize,
    pub h: f64,
}

impl DomainSpec {
    pub fn ball(dim: usize, radius: f64, h: f64) -> Self {
        Self { kind: DomainKind::Ball { radius }, dim, h }
    }

    pub fn cube(dim: usize, half_width: f64, h: f64) -> Self {
        Self { kind: DomainKind::Box { half_widths: vec![half_width; dim] }, dim, h }
    }

    pub fn ellipsoid(semi_axes: Vec<f64>, h: f64) -> Self {
        Self { dim: semi_axes.len(), kind: DomainKind::Ellipsoid { semi_axes }, h }
    }

    pub fn with_spacing(&self, h: f64) -> Self {
        Self { h, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |msg: String| Err(GridError::InvalidDomain(msg));
        if !(2..=3).contains(&self.dim) {
            return bad(format!("dimension {} not in {{2, 3}}", self.dim));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("spacing h = {} must be positive", self.h));
        }
        let check_axes = |a: &[f64]| {
            if a.len() != self.dim {
                return bad(format!("expected {} axis lengths, found {}", self.dim, a.len()));
            }
            if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("axis lengths must be positive".into());
            }
            Ok(())
        };
        match &self.kind {
            DomainKind::Box { half_widths } => check_axes(half_widths),
            DomainKind::Ellipsoid { semi_axes } => check_axes(semi_axes),
            DomainKind::Ball { radius } => {
                if radius.is_finite() && *radius > 0.0 {
                    Ok(())
                } else {
                    bad("radius must be positive".into())
                }
            }
        }
    }

    /// Ball and ellipsoid are strictly convex; the box is not, and reports
    /// carry that flag since the existence theory assumes strict convexity.
    pub fn is_strictly_convex(&self) -> bool {
        !matches!(self.kind, DomainKind::Box { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            DomainKind::Box { .. } => "box",
            DomainKind::Ball { .. } => "ball",
            DomainKind::Ellipsoid { .. } => "ellipsoid",
        }
    }

    /// Half extent of the bounding box along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        match &self.kind {
            DomainKind::Box { half_widths } => half_widths[axis],
            DomainKind::Ball { radius } => *radius,
            DomainKind::Ellipsoid { semi_axes } => semi_axes[axis],
        }
    }

    /// Strict interior test with a relative guard band of `1e-9·h`, so lattice
    /// points that sit on ∂Ω up to rounding are treated as boundary points.
    pub fn contains(&self, x: &[f64]) -> bool {
        let guard = 1e-9 * self.h;
        match &self.kind {
            DomainKind::Box { half_widths } => x.iter().zip(half_widths).all(|(xi, a)| xi.abs() < a - guard),
            DomainKind::Ball { radius } => norm(x) < radius - guard,
            DomainKind::Ellipsoid { semi_axes } => {
                let rho = x.iter().zip(semi_axes).map(|(xi, a)| (xi / a).powi(2)).sum::<f64>().sqrt();
                let amin = semi_axes.iter().copied().fold(f64::INFINITY, f64::min);
                (rho - 1.0) * amin < -guard
            }
        }
    }

    /// Smallest `t > 0` with `x + t·d ∈ ∂Ω`, for `x` inside.
    pub fn ray_exit(&self, x: &[f64], d: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Box { half_widths } => {
                let mut t = f64::INFINITY;
                for ((xi, di), a) in x.iter().zip(d).zip(half_widths) {
                    if *di > 0.0 {
                        t = t.min((a - xi) / di);
                    } else if *di < 0.0 {
                        t = t.min((-a - xi) / di);
                    }
                }
                t
            }
            DomainKind::Ball { radius } => quadric_exit(x, d, |_| 1.0 / (radius * radius)),
            DomainKind::Ellipsoid { semi_axes } => quadric_exit(x, d, |i| 1.0 / (semi_axes[i] * semi_axes[i])),
        }
    }

    /// Euclidean distance from an interior point to ∂Ω.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Box { half_widths } => x
                .iter()
                .zip(half_widths)
                .map(|(xi, a)| a - xi.abs())
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            DomainKind::Ball { radius } => (radius - norm(x)).max(0.0),
            DomainKind::Ellipsoid { semi_axes } => ellipsoid_distance(x, semi_axes),
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Positive root of `Σ wᵢ (xᵢ + t dᵢ)² = 1`.
fn quadric_exit(x: &[f64], d: &[f64], w: impl Fn(usize) -> f64) -> f64 {
    let (mut a, mut b, mut c) = (0.0, 0.0, -1.0);
    for i in 0..x.len() {
        let wi = w(i);
        a += wi * d[i] * d[i];
        b += 2.0 * wi * x[i] * d[i];
        c += wi * x[i] * x[i];
    }
    // c < 0 inside, so the discriminant is positive and the + root is the exit
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // numerically stable form of (-b + disc) / (2a)
    if b >= 0.0 {
        (-2.0 * c) / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    }
}

/// Distance from an interior point to the ellipsoid surface: the closest
/// point is `yᵢ = aᵢ² xᵢ / (aᵢ² + s)` for the root `s ∈ (-a_min², 0]` of
/// `Σ (aᵢ xᵢ / (aᵢ² + s))² = 1`. The root is bisected in `t = s + a_min²` so
/// that the shortest axis carries no cancellation.
fn ellipsoid_distance(x: &[f64], axes: &[f64]) -> f64 {
    // coordinates exactly on an axis make the root degenerate; nudge them
    let xs: Vec<f64> = x
        .iter()
        .zip(axes)
        .map(|(xi, a)| if xi.abs() < 1e-12 * a { 1e-12 * a } else { *xi })
        .collect();
    let amin2 = axes.iter().map(|a| a * a).fold(f64::INFINITY, f64::min);
    let shift: Vec<f64> = axes.iter().map(|a| a * a - amin2).collect();
    let f = |t: f64| {
        xs.iter().zip(axes).zip(&shift).map(|((xi, a), d)| (a * xi / (d + t)).powi(2)).sum::<f64>() - 1.0
    };
    let (mut lo, mut hi) = (0.0, amin2);
    if f(hi) >= 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    xs.iter()
        .zip(&shift)
        .map(|(xi, d)| (xi * (t - amin2) / (d + t)).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_exit_ball_and_box() {
        let ball = DomainSpec::ball(2, 1.0, 0.1);
        assert!((ball.ray_exit(&[0.0, 0.0], &[0.5, 0.0]) - 2.0).abs() < 1e-14);
        assert!((ball.ray_exit(&[0.6, 0.0], &[0.0, 1.0]) - 0.8).abs() < 1e-14);
        let cube = DomainSpec::cube(3, 0.5, 0.1);
        assert!((cube.ray_exit(&[0.1, 0.0, 0.0], &[1.0, 1.0, 0.0]) - 0.4).abs() < 1e-14);
    }

    #[test]
    fn ellipsoid_distance_on_axes_and_ball_limit() {
        let e = DomainSpec::ellipsoid(vec![2.0, 1.0, 1.5], 0.1);
        let d0 = e.distance_to_boundary(&[0.0, 0.0, 0.0]);
        assert!((d0 - 1.0).abs() < 1e-6, "{d0}");
        assert!((e.distance_to_boundary(&[1.5, 0.0, 0.0]) - 0.5).abs() < 1e-6);
        let b = DomainSpec::ellipsoid(vec![1.0, 1.0], 0.1);
        assert!((b.distance_to_boundary(&[0.3, 0.4]) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(DomainSpec::ball(4, 1.0, 0.1).validate().is_err());
        assert!(DomainSpec::ball(3, 1.0, 0.0).validate().is_err());
        assert!(DomainSpec::ball(3, -1.0, 0.1).validate().is_err());
        assert!(DomainSpec::ellipsoid(vec![1.0, 2.0], 0.1).validate().is_ok());
        assert!(!DomainSpec::cube(2, 0.5, 0.1).is_strictly_convex());
    }
}
