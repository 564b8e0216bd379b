//! Finite-difference stencils on the lattice, with Shortley–Weller arms where
//! a stencil line leaves Ω.
//!
//! Every second derivative is a three-point difference along a lattice line:
//! the axes `eᵢ` for pure entries and the diagonals `eᵢ ± eⱼ` for mixed ones,
//! `u_ij = (∂²_{eᵢ+eⱼ} − ∂²_{eᵢ−eⱼ})/2` in unit-direction form. With arms `a`
//! and `b` the difference
//!
//! ```text
//! ∂²u ≈ 2/(a+b) · [(u₊ − u₀)/a − (u₀ − u₋)/b]
//! ```
//!
//! is exact on quadratics for any arm lengths and second order when `a = b`.
//! At regular nodes the diagonal pair reduces to the usual 4-point cross
//! difference.

use std::collections::BTreeMap;

/// Affine functional of the nodal values: `center·u[self] + Σ w·u[j] + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub center: f64,
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearForm {
    #[inline]
    pub fn eval(&self, u: &[f64], node: usize) -> f64 {
        let mut s = self.center * u[node] + self.constant;
        for &(j, w) in &self.terms {
            s += w * u[j];
        }
        s
    }

    /// Same as [`eval`](Self::eval) with the boundary contribution dropped.
    #[inline]
    pub fn eval_homogeneous(&self, u: &[f64], node: usize) -> f64 {
        let mut s = self.center * u[node];
        for &(j, w) in &self.terms {
            s += w * u[j];
        }
        s
    }
}

/// Where a stencil arm ends.
#[derive(Clone, Debug, PartialEq)]
pub enum ArmEnd {
    Node(usize),
    Boundary { value: f64 },
}

/// One arm of a stencil line: `fraction ∈ (0, 1]` of the lattice step.
#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub fraction: f64,
    pub end: ArmEnd,
}

impl Arm {
    pub fn is_full(&self) -> bool {
        matches!(self.end, ArmEnd::Node(_))
    }
}

/// Accumulates weighted arm endpoints into a [`LinearForm`].
#[derive(Default)]
pub(crate) struct FormBuilder {
    center: f64,
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl FormBuilder {
    pub fn add_center(&mut self, w: f64) {
        self.center += w;
    }

    pub fn add_end(&mut self, end: &ArmEnd, w: f64) {
        match end {
            ArmEnd::Node(j) => *self.terms.entry(*j).or_insert(0.0) += w,
            ArmEnd::Boundary { value } => self.constant += w * value,
        }
    }

    pub fn add_scaled(&mut self, other: &LinearForm, s: f64) {
        self.center += s * other.center;
        self.constant += s * other.constant;
        for &(j, w) in &other.terms {
            *self.terms.entry(j).or_insert(0.0) += s * w;
        }
    }

    pub fn finish(self) -> LinearForm {
        LinearForm { center: self.center, terms: self.terms.into_iter().collect(), constant: self.constant }
    }
}

/// Second derivative along a line with physical arm lengths `a` (forward)
/// and `b` (backward).
pub(crate) fn second_difference(plus: &Arm, minus: &Arm, step: f64) -> LinearForm {
    let a = plus.fraction * step;
    let b = minus.fraction * step;
    let mut f = FormBuilder::default();
    f.add_end(&plus.end, 2.0 / (a * (a + b)));
    f.add_end(&minus.end, 2.0 / (b * (a + b)));
    f.add_center(-2.0 / (a * b));
    f.finish()
}

/// First derivative along a line, exact on quadratics.
pub(crate) fn first_difference(plus: &Arm, minus: &Arm, step: f64) -> LinearForm {
    let a = plus.fraction * step;
    let b = minus.fraction * step;
    let mut f = FormBuilder::default();
    f.add_end(&plus.end, b / (a * (a + b)));
    f.add_end(&minus.end, -a / (b * (a + b)));
    f.add_center((a - b) / (a * b));
    f.finish()
}

/// Per-node stencil: one form per packed Hessian entry and per gradient
/// component, plus the accuracy bookkeeping for boundary-adjacent nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeStencil {
    pub hess: Vec<LinearForm>,
    pub grad: Vec<LinearForm>,
    /// Some axis line has unequal arms (first-order pure second derivative).
    pub pure_first_order: bool,
    /// Some diagonal line has unequal arms (first-order mixed derivative).
    pub mixed_first_order: bool,
}

impl NodeStencil {
    /// Indices of all nodes other than the center that the stencil touches.
    pub fn footprint(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .hess
            .iter()
            .chain(&self.grad)
            .flat_map(|f| f.terms.iter().map(|&(j, _)| j))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(fraction: f64, value: f64) -> Arm {
        Arm { fraction, end: ArmEnd::Boundary { value } }
    }

    #[test]
    fn nonuniform_differences_exact_on_quadratics() {
        // u(s) = 3 + 2s - 1.5 s², evaluated at s = +a and s = -b
        let u = |s: f64| 3.0 + 2.0 * s - 1.5 * s * s;
        let step = 0.1;
        for &(fa, fb) in &[(1.0, 1.0), (0.3, 1.0), (1.0, 0.07), (0.45, 0.8)] {
            let p = arm(fa, u(fa * step));
            let m = arm(fb, u(-fb * step));
            let d2 = second_difference(&p, &m, step);
            let d1 = first_difference(&p, &m, step);
            let u0 = [u(0.0)];
            assert!((d2.eval(&u0, 0) + 3.0).abs() < 1e-9);
            assert!((d1.eval(&u0, 0) - 2.0).abs() < 1e-11);
        }
    }
}
