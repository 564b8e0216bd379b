//! Numerical solver and estimate probes for the Dirichlet problem of the
//! Lagrangian phase equation
//!
//! ```text
//! Σᵢ arctan λᵢ(D²u) = θ(x)  in Ω,     u = φ  on ∂Ω.
//! ```
//!
//! Module map:
//! - [`operator`]: the phase operator on symmetric matrices and its derivatives
//! - [`geometry`]: induced metric and curvature of the gradient graph `(x, Du)`
//! - [`grid`]: lattice discretization with Shortley–Weller boundary arms
//! - [`solver`]: damped Newton, phase continuation, comparison utilities
//! - [`diagnostics`]: Jacobi, gradient and interior Hessian probes
//! - [`cli`]: config files, expressions and the command implementations

pub mod operator;
pub mod geometry;
pub mod grid;
pub mod solver;
pub mod diagnostics;
pub mod cli;
