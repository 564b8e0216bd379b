//! Damped Newton iteration, phase continuation and comparison utilities.

mod compare;
mod continuation;
mod linear;
mod newton;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridError;

pub use compare::{comparison_check, translation_lipschitz_probe, ComparisonResult, LipschitzProbe};
pub use continuation::{continuation_solve, ContinuationOutcome, ContinuationPath, StageTrace};
pub use linear::{gmres_ilu0, solve_direct, solve_linear, DIRECT_LIMIT};
pub use newton::{initial_guess, newton_solve, trace_csv, TraceRow, TRACE_COLUMNS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Max-norm residual target.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub min_step: f64,
    pub continuation_steps: usize,
    /// Relative residual target of iterative linear solves.
    pub linear_solver_tol: f64,
    /// How many times a failed continuation interval may be halved.
    pub max_bisections: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-8,
            max_newton_iters: 50,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            min_step: 1e-10,
            continuation_steps: 8,
            linear_solver_tol: 1e-10,
            max_bisections: 6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.into()));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.newton_tol) || !pos(self.min_step) || !pos(self.linear_solver_tol) {
            return bad("tolerances must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if self.continuation_steps == 0 {
            return bad("continuation_steps must be at least 1");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("line search stagnated below the minimum step after {} iterations", .trace.len())]
    Stagnation { trace: Vec<TraceRow> },
    #[error("Newton did not converge within {} iterations", .trace.len().saturating_sub(1))]
    NonConvergence { trace: Vec<TraceRow> },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("continuation failed at s = {s} after {depth} bisections: {source}")]
    Continuation {
        s: f64,
        depth: usize,
        stages: Vec<StageTrace>,
        #[source]
        source: Box<SolverError>,
    },
    #[error("invalid continuation path: {0}")]
    InvalidPath(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl SolverError {
    /// Iteration log carried by the error, if any.
    pub fn trace(&self) -> Vec<TraceRow> {
        match self {
            SolverError::Stagnation { trace } | SolverError::NonConvergence { trace } => trace.clone(),
            SolverError::Continuation { stages, source, .. } => {
                let mut t: Vec<TraceRow> = stages.iter().flat_map(|s| s.trace.iter().cloned()).collect();
                t.extend(source.trace());
                t
            }
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests;
