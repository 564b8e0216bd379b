use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{solve_linear, SolverConfig, SolverError};
use crate::grid::GridProblem;

/// One accepted Newton iterate (iteration 0 is the starting point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: usize,
    pub iter: usize,
    pub residual_max: f64,
    /// Damping factor of the step that produced this iterate; 0 at the start.
    pub step_length: f64,
    pub lambda1_max: f64,
    pub lambdan_min: f64,
}

pub const TRACE_COLUMNS: [&str; 6] = ["stage", "iter", "residual_max", "step_length", "lambda1_max", "lambdan_min"];

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = TRACE_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{:e},{:e},{:e},{:e}",
            r.stage, r.iter, r.residual_max, r.step_length, r.lambda1_max, r.lambdan_min
        )
        .unwrap();
    }
    s
}

fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn trace_row(p: &GridProblem, u: &[f64], stage: usize, iter: usize, residual_max: f64, step_length: f64) -> Result<TraceRow, SolverError> {
    let spectra = p.spectra_of(u)?;
    let lambda1_max = spectra.iter().map(|s| s.largest()).fold(f64::NEG_INFINITY, f64::max);
    let lambdan_min = spectra.iter().map(|s| s.smallest()).fold(f64::INFINITY, f64::min);
    Ok(TraceRow { stage, iter, residual_max, step_length, lambda1_max, lambdan_min })
}

/// Damped Newton on `F(D²ₕu) − θ = 0` starting from `p.u`, with a
/// backtracking line search on the residual max-norm:
/// a step `α` is accepted once `‖r(u + αδ)‖∞ ≤ (1 − cα)‖r(u)‖∞`.
///
/// On success `p.u` holds the solution; on failure it holds the last
/// accepted iterate.
pub fn newton_solve(p: &mut GridProblem, cfg: &SolverConfig, stage: usize) -> Result<Vec<TraceRow>, SolverError> {
    cfg.validate()?;
    let mut r = p.residual()?;
    let mut rmax = max_norm(&r);
    let mut trace = vec![trace_row(p, &p.u, stage, 0, rmax, 0.0)?];
    for iter in 1..=cfg.max_newton_iters + 1 {
        if rmax <= cfg.newton_tol {
            return Ok(trace);
        }
        if iter > cfg.max_newton_iters {
            break;
        }
        let j = p.assemble_jacobian()?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_linear(&j, &rhs, cfg.linear_solver_tol)?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = p.u.iter().zip(&delta).map(|(u, d)| u + alpha * d).collect();
            if let Ok(rt) = p.residual_of(&trial) {
                let m = max_norm(&rt);
                if m <= (1.0 - cfg.armijo_c * alpha) * rmax {
                    p.u = trial;
                    r = rt;
                    rmax = m;
                    break;
                }
            }
            alpha *= cfg.backtrack_factor;
            if alpha < cfg.min_step {
                return Err(SolverError::Stagnation { trace });
            }
        }
        trace.push(trace_row(p, &p.u, stage, iter, rmax, alpha)?);
    }
    Err(SolverError::NonConvergence { trace })
}

/// Supercritical quadratic start `q = tan(θ₀/n)/2·|x|²` plus the affine
/// function that best fits `φ − q` (least squares) over the boundary points
/// reached by cut stencil arms. The discrete Hessian of the result is
/// `tan(θ₀/n)·I`, so its phase is exactly `θ₀`.
pub fn initial_guess(p: &GridProblem, theta0: f64) -> Vec<f64> {
    let n = p.dim();
    let k = (theta0 / n as f64).tan() / 2.0;
    let q = |x: &[f64]| k * x.iter().map(|v| v * v).sum::<f64>();
    let samples = p.boundary_samples();
    let coef = if samples.is_empty() {
        DVector::zeros(n + 1)
    } else {
        let a = DMatrix::from_fn(samples.len(), n + 1, |r, c| if c == 0 { 1.0 } else { samples[r].0[c - 1] });
        let b = DVector::from_iterator(samples.len(), samples.iter().map(|(z, v)| v - q(z)));
        a.svd(true, true).solve(&b, 1e-12).unwrap_or_else(|_| DVector::zeros(n + 1))
    };
    p.nodes()
        .iter()
        .map(|nd| q(&nd.x) + coef[0] + nd.x.iter().zip(coef.iter().skip(1)).map(|(x, c)| x * c).sum::<f64>())
        .collect()
}
