use serde::{Deserialize, Serialize};

use super::{DiagnosticsError, ProbeConfig};
use crate::grid::GridProblem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientProbe {
    /// `max |∇ₕu|` over nodes farther than the band width from ∂Ω.
    pub interior_max: f64,
    /// `max |∇ₕu|` over the boundary band.
    pub band_max: f64,
    /// Node maximizing `|∇ₕu| + ε ũ²` with `ũ = u − min u + M ∈ [M, 2M]`.
    pub test_argmax_node: usize,
    pub test_max_in_band: bool,
    /// The shift level `M` (the oscillation of `u`, or 1 for constant `u`).
    pub shift_level: f64,
    pub interior_nodes: usize,
    pub band_nodes: usize,
}

impl GradientProbe {
    /// `interior_max − band_max`, positive when the interior wins.
    pub fn excess(&self) -> f64 {
        self.interior_max - self.band_max
    }
}

pub fn gradient_max_principle_probe(p: &GridProblem, u: &[f64], cfg: &ProbeConfig) -> Result<GradientProbe, DiagnosticsError> {
    p.check_field(u)?;
    let band = cfg.boundary_band_width * p.h();
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let m = if hi > lo { hi - lo } else { 1.0 };
    let mut out = GradientProbe {
        interior_max: 0.0,
        band_max: 0.0,
        test_argmax_node: 0,
        test_max_in_band: false,
        shift_level: m,
        interior_nodes: 0,
        band_nodes: 0,
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..p.len() {
        let g = p.gradient_of(u, i).iter().map(|v| v * v).sum::<f64>().sqrt();
        let in_band = p.node(i).boundary_distance <= band;
        if in_band {
            out.band_max = out.band_max.max(g);
            out.band_nodes += 1;
        } else {
            out.interior_max = out.interior_max.max(g);
            out.interior_nodes += 1;
        }
        let shifted = u[i] - lo + m;
        let t = g + cfg.epsilon_grad * shifted * shifted;
        if t > best {
            best = t;
            out.test_argmax_node = i;
            out.test_max_in_band = in_band;
        }
    }
    Ok(out)
}
