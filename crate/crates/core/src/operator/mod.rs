//! The Lagrangian phase operator `F(M) = Σ arctan λᵢ(M)` on symmetric
//! matrices: evaluation, first and second derivatives, phase classification
//! and the structure of critical-phase spectra.

mod level;
mod lemma;
mod matrix;
mod phase;
pub mod suite;

use thiserror::Error;

pub use level::{
    check_level_set_convexity, closing_value, complete_on_level, invert_arctan, midpoint_margin,
    sample_spectrum_on_level, search_convexity_counterexample, ConvexitySearch, LevelSampler,
};
pub use lemma::{check_eigen_lemma, elementary_symmetric, EigenLemmaReport};
pub use matrix::{Spectrum, SymMatrix};
pub use phase::{
    classify_phase, critical_phase, phase_bound, phase_gradient, phase_hessian_diag_frame, phase_of,
    phase_of_spectrum, HessianTable, PhaseClass, DEGENERATE_GAP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("symmetric eigensolver produced non-finite eigenvalues")]
    EigenFailure,
    #[error("degenerate spectrum: eigenvalue gap {gap:e} below threshold")]
    DegenerateSpectrum { gap: f64 },
    #[error("phase out of range: [{theta_min}, {theta_max}] not inside (-{bound}, {bound})")]
    PhaseOutOfRange { theta_min: f64, theta_max: f64, bound: f64 },
    #[error("inconsistent input: spectrum phase {phase} differs from theta {theta} by more than {tol:e}")]
    InconsistentInput { phase: f64, theta: f64, tol: f64 },
    #[error("theta {theta} is below the critical phase {critical}")]
    OutsideRegime { theta: f64, critical: f64 },
    #[error("sampling exhausted: no admissible spectrum on level {level} after {attempts} attempts")]
    SamplingExhausted { level: f64, attempts: usize },
}
