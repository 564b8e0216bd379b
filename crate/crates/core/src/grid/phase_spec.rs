use std::fmt;
use std::sync::Arc;

use crate::operator::{classify_phase, OperatorError, PhaseClass};

type PhaseFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Boundary data `φ` on ∂Ω.
pub type BoundaryFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub fn boundary_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> BoundaryFn {
    Arc::new(f)
}

/// Phase function `θ(x)` or `θ(x, u)` in radians.
#[derive(Clone)]
pub struct PhaseSpec {
    dim: usize,
    func: Arc<PhaseFn>,
    depends_on_u: bool,
    constant: Option<f64>,
    label: String,
}

impl fmt::Debug for PhaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseSpec")
            .field("dim", &self.dim)
            .field("depends_on_u", &self.depends_on_u)
            .field("label", &self.label)
            .finish()
    }
}

impl PhaseSpec {
    pub fn constant(dim: usize, theta: f64) -> Self {
        Self {
            dim,
            func: Arc::new(move |_, _| theta),
            depends_on_u: false,
            constant: Some(theta),
            label: format!("{theta}"),
        }
    }

    pub fn from_fn(dim: usize, label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, func: Arc::new(move |x, _| f(x)), depends_on_u: false, constant: None, label: label.into() }
    }

    /// Phase depending on the solution value as well as the position.
    pub fn from_fn_xu(
        dim: usize,
        label: impl Into<String>,
        f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { dim, func: Arc::new(f), depends_on_u: true, constant: None, label: label.into() }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], u: f64) -> f64 {
        (self.func)(x, u)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depends_on_u(&self) -> bool {
        self.depends_on_u
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Classification of a sampled phase field.
pub fn classify_values(values: &[f64], n: usize) -> Result<PhaseClass, OperatorError> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if values.is_empty() {
        return Err(OperatorError::InvalidInput("empty phase field".into()));
    }
    classify_phase(lo, hi, n)
}
