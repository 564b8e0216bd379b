use serde::{Deserialize, Serialize};

use super::{initial_guess, newton_solve, SolverConfig, SolverError, TraceRow};
use crate::grid::{GridProblem, PhaseSpec};
use crate::operator::{critical_phase, phase_bound};

/// Homotopy `θ_s = (1 − s)Θ₀ + s·θ` from a supercritical constant `Θ₀` to the
/// target phase, visited at the schedule points `0 = s₀ < … < s_K = 1`.
#[derive(Clone, Debug)]
pub struct ContinuationPath {
    pub start_phase: f64,
    pub target: PhaseSpec,
    pub schedule: Vec<f64>,
}

impl ContinuationPath {
    /// Uniform schedule `s_k = k/K`.
    pub fn uniform(start_phase: f64, target: PhaseSpec, steps: usize) -> Self {
        let k = steps.max(1);
        let schedule = (0..=k).map(|i| i as f64 / k as f64).collect();
        Self { start_phase, target, schedule }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.target.dim();
        let bad = |m: String| Err(SolverError::InvalidPath(m));
        if !(self.start_phase > critical_phase(n) && self.start_phase < phase_bound(n)) {
            return bad(format!("start phase {} is not supercritical for n = {n}", self.start_phase));
        }
        let s = &self.schedule;
        if s.first() != Some(&0.0) || s.last() != Some(&1.0) {
            return bad("schedule must start at 0 and end at 1".into());
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return bad("schedule must be strictly increasing".into());
        }
        Ok(())
    }

    /// Phase of the stage at `s`.
    pub fn phase_at(&self, s: f64) -> PhaseSpec {
        let t0 = self.start_phase;
        if s == 0.0 {
            return PhaseSpec::constant(self.target.dim(), t0);
        }
        if s == 1.0 {
            return self.target.clone();
        }
        let target = self.target.clone();
        let n = target.dim();
        let label = format!("(1-{s})*{t0} + {s}*({})", target.label());
        if let Some(c) = target.constant_value() {
            return PhaseSpec::constant(n, (1.0 - s) * t0 + s * c);
        }
        if target.depends_on_u() {
            PhaseSpec::from_fn_xu(n, label, move |x, u| (1.0 - s) * t0 + s * target.eval(x, u))
        } else {
            PhaseSpec::from_fn(n, label, move |x| (1.0 - s) * t0 + s * target.eval(x, 0.0))
        }
    }
}

/// Newton log of one continuation stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub s: f64,
    /// Number of halvings of the schedule interval that led to this stage.
    pub depth: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Debug)]
pub struct ContinuationOutcome {
    pub u: Vec<f64>,
    pub stages: Vec<StageTrace>,
    /// Deepest bisection level that was needed.
    pub max_depth: usize,
}

impl ContinuationOutcome {
    pub fn trace(&self) -> Vec<TraceRow> {
        self.stages.iter().flat_map(|s| s.trace.iter().cloned()).collect()
    }

    pub fn final_residual(&self) -> f64 {
        self.stages.last().and_then(|s| s.trace.last()).map_or(f64::NAN, |r| r.residual_max)
    }
}

/// Solves the `s₀` stage from [`initial_guess`], then each later stage warm
/// started from the previous one. A failed stage is retried after solving at
/// the midpoint of its interval, up to `cfg.max_bisections` halvings.
///
/// `p` ends up holding the final stage's phase and solution.
pub fn continuation_solve(p: &mut GridProblem, path: &ContinuationPath, cfg: &SolverConfig) -> Result<ContinuationOutcome, SolverError> {
    cfg.validate()?;
    path.validate()?;
    if path.target.dim() != p.dim() {
        return Err(SolverError::InvalidPath(format!("phase dimension {} on a {}-d grid", path.target.dim(), p.dim())));
    }
    p.set_phase(path.phase_at(0.0))?;
    p.u = initial_guess(p, path.start_phase);

    let mut stages: Vec<StageTrace> = Vec::new();
    let mut last_s: Option<f64> = None;
    let mut max_depth = 0;
    let mut pending: Vec<(f64, usize)> = path.schedule.iter().rev().map(|&s| (s, 0)).collect();
    while let Some((s, depth)) = pending.pop() {
        let saved = p.u.clone();
        let attempt = p.set_phase(path.phase_at(s)).map_err(SolverError::from).and_then(|_| newton_solve(p, cfg, stages.len()));
        match attempt {
            Ok(trace) => {
                stages.push(StageTrace { s, depth, trace });
                last_s = Some(s);
                max_depth = max_depth.max(depth);
            }
            Err(err) => {
                p.u = saved;
                match last_s {
                    Some(prev) if depth < cfg.max_bisections => {
                        pending.push((s, depth + 1));
                        pending.push((0.5 * (prev + s), depth + 1));
                    }
                    _ => {
                        return Err(SolverError::Continuation { s, depth, stages, source: Box::new(err) });
                    }
                }
            }
        }
    }
    Ok(ContinuationOutcome { u: p.u.clone(), stages, max_depth })
}
