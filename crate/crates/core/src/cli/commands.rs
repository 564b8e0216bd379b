//! The four commands. Each returns an exit status and writes its artifacts
//! atomically into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::diagnostics::run_diagnostics;
use crate::grid::{dump_csv, node_table, read_dump, GridProblem, NodeClass};
use crate::operator::suite::{
    convexity_suite, eigen_lemma_suite, gradient_fd_check, hessian_fd_check, orthogonal_invariance, SuiteOutcome,
};
use crate::operator::{critical_phase, search_convexity_counterexample, LevelSampler, OperatorError, PhaseClass};
use crate::solver::{continuation_solve, initial_guess, newton_solve, trace_csv, ContinuationPath, SolverConfig, SolverError, TraceRow};

use super::config::{ConfigError, OutputFormat, RunConfig};

pub const EXIT_OK: i32 = 0;
/// A check ran to completion and reported a violation.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_SAMPLER: i32 = 4;

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

/// Shared command settings.
#[derive(Clone, Debug)]
pub struct Context {
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

impl Context {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.map(|c| PathBuf::from(&c.output_dir)))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn write(&self, dir: &Path, name: &str, contents: &str) -> Result<(), i32> {
        write_atomic(&dir.join(name), contents).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", dir.join(name).display());
            EXIT_CONFIG
        })
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read config {}: {e}", path.display());
        EXIT_CONFIG
    })?;
    RunConfig::parse(&text).map_err(|e: ConfigError| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_CONFIG
    })
}

fn build(cfg: &RunConfig, h: Option<f64>) -> Result<GridProblem, i32> {
    cfg.build_problem(h).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}

/// Result of solving one configured problem.
pub struct SolveRun {
    pub trace: Vec<TraceRow>,
    pub stages: usize,
    pub max_depth: usize,
}

/// Newton from the closed-form guess when the phase is a supercritical
/// constant, continuation from the configured start phase otherwise.
pub fn solve_configured(p: &mut GridProblem, start_phase: f64, cfg: &SolverConfig) -> Result<SolveRun, SolverError> {
    match p.phase().constant_value() {
        Some(theta) if p.classification() == PhaseClass::Supercritical => {
            p.u = initial_guess(p, theta);
            let trace = newton_solve(p, cfg, 0)?;
            Ok(SolveRun { trace, stages: 1, max_depth: 0 })
        }
        _ => {
            let path = ContinuationPath::uniform(start_phase, p.phase().clone(), cfg.continuation_steps);
            let out = continuation_solve(p, &path, cfg)?;
            Ok(SolveRun { trace: out.trace(), stages: out.stages.len(), max_depth: out.max_depth })
        }
    }
}

/// `(max over all nodes, max over interior nodes)` of `|u − exact|`.
fn errors(p: &GridProblem, exact: &[f64]) -> (f64, f64) {
    let mut all = 0.0f64;
    let mut interior = 0.0f64;
    for (i, node) in p.nodes().iter().enumerate() {
        let e = (p.u[i] - exact[i]).abs();
        all = all.max(e);
        if node.class == NodeClass::Interior {
            interior = interior.max(e);
        }
    }
    (all, interior)
}

fn grid_json(p: &GridProblem) -> Value {
    let interior = p.nodes().iter().filter(|n| n.class == NodeClass::Interior).count();
    json!({
        "domain": p.domain().kind_name(),
        "dim": p.dim(),
        "h": p.h(),
        "nodes": p.len(),
        "interior_nodes": interior,
        "strictly_convex": p.domain().is_strictly_convex(),
    })
}

pub fn cmd_solve(config: &Path, ctx: &Context) -> i32 {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut p = match build(&cfg, None) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let dir = ctx.out_dir(Some(&cfg));
    let class = p.classification();
    ctx.say(format!("solve: {} nodes, h = {}, phase {}", p.len(), p.h(), class.as_str()));
    let outcome = solve_configured(&mut p, cfg.continuation_start(), &cfg.solver);
    let mut summary = json!({
        "command": "solve",
        "classification": class.as_str(),
        "grid": grid_json(&p),
    });
    let code = match &outcome {
        Ok(run) => {
            let residual = p.residual().unwrap_or_default();
            let final_residual = residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            summary["converged"] = json!(true);
            summary["final_residual"] = json!(final_residual);
            summary["newton_iterations"] = json!(run.trace.iter().filter(|r| r.iter > 0).count());
            summary["stages"] = json!(run.stages);
            summary["max_bisection_depth"] = json!(run.max_depth);
            if let Some(exact) = cfg.exact_fn() {
                let (all, interior) = errors(&p, &p.sample(exact));
                summary["solution_error"] = json!(all);
                summary["solution_error_interior"] = json!(interior);
            }
            if cfg.formats.contains(&OutputFormat::Csv) {
                if let Err(c) = ctx
                    .write(&dir, "solution.csv", &dump_csv(&p, &residual))
                    .and_then(|_| ctx.write(&dir, "trace.csv", &trace_csv(&run.trace)))
                {
                    return c;
                }
            }
            if cfg.formats.contains(&OutputFormat::Table) {
                if let Err(c) = ctx.write(&dir, "solution.txt", &node_table(&p, &residual)) {
                    return c;
                }
            }
            ctx.say(format!("converged: residual {final_residual:e} after {} stage(s)", run.stages));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            summary["converged"] = json!(false);
            summary["error"] = json!(e.to_string());
            if let Err(c) = ctx.write(&dir, "trace.csv", &trace_csv(&e.trace())) {
                return c;
            }
            match e {
                SolverError::Grid(_) | SolverError::InvalidConfig(_) | SolverError::InvalidPath(_) => EXIT_CONFIG,
                _ => EXIT_SOLVER,
            }
        }
    };
    if cfg.formats.contains(&OutputFormat::Json) || code != EXIT_OK {
        if let Err(c) = ctx.write(&dir, "summary.json", &json_text(&summary)) {
            return c;
        }
    }
    code
}

/// Parameters of `verify-lemmas`.
#[derive(Clone, Debug)]
pub struct LemmaArgs {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub sampler: LevelSampler,
}

fn suite_json(s: &SuiteOutcome) -> Value {
    serde_json::to_value(s).expect("suite outcome serializes")
}

/// Lattice of free eigenvalues for the sharpness search at level 0.
const SHARPNESS_LATTICE: [f64; 13] = [-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

/// Runs every operator suite, then the expected-to-fail convexity search at
/// level 0 when that level is subcritical.
pub fn run_lemma_suites(args: &LemmaArgs) -> Result<(Vec<SuiteOutcome>, Option<Value>), OperatorError> {
    let (n, count, seed) = (args.n, args.count, args.seed);
    let crit = critical_phase(n);
    let suites = vec![
        orthogonal_invariance(n, count, seed)?,
        gradient_fd_check(n, count, seed.wrapping_add(1))?,
        hessian_fd_check(n, count, seed.wrapping_add(2))?,
        eigen_lemma_suite(n, crit, count, seed.wrapping_add(3), &args.sampler)?,
        eigen_lemma_suite(n, crit + 0.2, count, seed.wrapping_add(4), &args.sampler)?,
        convexity_suite(n, crit, count, seed.wrapping_add(5))?,
    ];
    let sharpness = if crit > 0.0 {
        let search = search_convexity_counterexample(0.0, n, &SHARPNESS_LATTICE)?;
        Some(json!({
            "name": "level_convexity(c=0)",
            "n": n,
            "expected_failure": true,
            "violation_found": search.min_margin < -1e-10,
            "min_margin": search.min_margin,
            "pair": search.pair,
            "lattice_points": search.points,
        }))
    } else {
        None
    };
    Ok((suites, sharpness))
}

pub fn cmd_verify_lemmas(args: &LemmaArgs, ctx: &Context) -> i32 {
    if !(2..=4).contains(&args.n) {
        eprintln!("error: n = {} must be 2, 3 or 4", args.n);
        return EXIT_CONFIG;
    }
    if args.count == 0 {
        eprintln!("error: count must be at least 1");
        return EXIT_CONFIG;
    }
    let (suites, sharpness) = match run_lemma_suites(args) {
        Ok(r) => r,
        Err(e @ OperatorError::SamplingExhausted { .. }) => {
            eprintln!("error: {e}");
            return EXIT_SAMPLER;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CHECK_FAILED;
        }
    };
    // A sharpness search that finds no violation is a failed check too.
    let sharp_ok = sharpness.as_ref().is_none_or(|s| s["violation_found"] == json!(true));
    let all_pass = suites.iter().all(|s| s.passed) && sharp_ok;
    for s in &suites {
        ctx.say(format!(
            "{:<28} n={} cases={:<6} worst={:+.3e} threshold={:+.1e} {}",
            s.name,
            s.n,
            s.cases,
            s.worst,
            s.threshold,
            if s.passed { "pass" } else { "FAIL" }
        ));
    }
    if let Some(s) = &sharpness {
        ctx.say(format!(
            "{:<28} n={} expected failure, violation found: {} (min margin {:+.3e})",
            "level_convexity(c=0)", args.n, s["violation_found"], s["min_margin"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    let report = json!({
        "command": "verify-lemmas",
        "n": args.n,
        "count": args.count,
        "seed": args.seed,
        "suites": suites.iter().map(suite_json).collect::<Vec<_>>(),
        "expected_failures": sharpness.into_iter().collect::<Vec<_>>(),
        "all_pass": all_pass,
    });
    if let Err(c) = ctx.write(&ctx.out_dir(None), "lemmas.json", &json_text(&report)) {
        return c;
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// One row of the convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub nodes: usize,
    pub error: f64,
    pub error_interior: f64,
}

/// Observed order between consecutive levels, `None` on the first level and
/// when both errors sit at the solver's rounding floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Order {
    None,
    Exact,
    Value(f64),
}

impl Order {
    pub fn text(self) -> String {
        match self {
            Order::None => String::new(),
            Order::Exact => "exact".into(),
            Order::Value(v) => format!("{v:.6}"),
        }
    }
}

fn order(prev: f64, cur: f64, ratio: f64, floor: f64) -> Order {
    if prev <= floor && cur <= floor {
        Order::Exact
    } else {
        Order::Value((prev / cur).ln() / ratio.ln())
    }
}

/// Table of a manufactured-solution study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<LevelRow>,
    /// Orders over all nodes, one per row.
    pub orders: Vec<Order>,
    /// Orders over interior nodes, one per row.
    pub orders_interior: Vec<Order>,
}

impl ConvergenceTable {
    pub fn csv(&self) -> String {
        let mut s = String::from("level,h,nodes,error_max,order,error_interior,order_interior\n");
        for (k, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:e},{},{:e},{},{:e},{}",
                r.level,
                r.h,
                r.nodes,
                r.error,
                self.orders[k].text(),
                r.error_interior,
                self.orders_interior[k].text()
            );
        }
        s
    }

    /// Every measured order over all nodes lies in `band`.
    pub fn within(&self, band: (f64, f64)) -> bool {
        self.orders.iter().all(|o| match o {
            Order::Value(v) => *v >= band.0 && *v <= band.1,
            _ => true,
        })
    }
}

/// Solves the manufactured problem at `h / 2^k`, `k < levels`. Levels run
/// concurrently; each owns its grid.
pub fn convergence_study(cfg: &RunConfig, levels: usize) -> Result<ConvergenceTable, (usize, SolverError)> {
    let exact = cfg.exact_fn().expect("caller checks for a manufactured solution");
    let h0 = cfg.domain.h;
    let solved: Vec<Result<LevelRow, (usize, SolverError)>> = (0..levels)
        .into_par_iter()
        .map(|k| {
            let h = h0 / f64::powi(2.0, k as i32);
            let mut p = cfg.build_problem(Some(h)).map_err(|e| (k, e.into()))?;
            solve_configured(&mut p, cfg.continuation_start(), &cfg.solver).map_err(|e| (k, e))?;
            let (error, error_interior) = errors(&p, &p.sample(&exact));
            Ok(LevelRow { level: k, h, nodes: p.len(), error, error_interior })
        })
        .collect();
    let rows = solved.into_iter().collect::<Result<Vec<_>, _>>()?;
    let floor = 10.0 * cfg.solver.newton_tol;
    let mut orders = vec![Order::None];
    let mut orders_interior = vec![Order::None];
    for w in rows.windows(2) {
        let ratio = w[0].h / w[1].h;
        orders.push(order(w[0].error, w[1].error, ratio, floor));
        orders_interior.push(order(w[0].error_interior, w[1].error_interior, ratio, floor));
    }
    Ok(ConvergenceTable { rows, orders, orders_interior })
}

pub fn cmd_convergence(config: &Path, levels: usize, ctx: &Context) -> i32 {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if cfg.exact.is_none() {
        eprintln!("error: {}: convergence needs boundary.exact", config.display());
        return EXIT_CONFIG;
    }
    if levels == 0 {
        eprintln!("error: levels must be at least 1");
        return EXIT_CONFIG;
    }
    // validate every level's grid before solving any
    for k in 0..levels {
        if let Err(code) = build(&cfg, Some(cfg.domain.h / f64::powi(2.0, k as i32))) {
            return code;
        }
    }
    let dir = ctx.out_dir(Some(&cfg));
    match convergence_study(&cfg, levels) {
        Ok(table) => {
            if let Err(c) = ctx.write(&dir, "convergence.csv", &table.csv()) {
                return c;
            }
            if !ctx.quiet {
                print!("{}", table.csv());
            }
            if table.within(cfg.order_band) {
                EXIT_OK
            } else {
                eprintln!("observed order outside [{}, {}]", cfg.order_band.0, cfg.order_band.1);
                EXIT_CHECK_FAILED
            }
        }
        Err((k, e)) => {
            eprintln!("error: level {k}: {e}");
            let _ = ctx.write(&dir, "trace.csv", &trace_csv(&e.trace()));
            EXIT_SOLVER
        }
    }
}

pub fn cmd_diagnose(config: &Path, dump: &Path, ctx: &Context) -> i32 {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut p = match build(&cfg, None) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let loaded = fs::read_to_string(dump)
        .map_err(|e| e.to_string())
        .and_then(|t| read_dump(&t).map_err(|e| e.to_string()))
        .and_then(|d| d.apply_to(&mut p).map_err(|e| e.to_string()));
    if let Err(e) = loaded {
        eprintln!("error: {}: {e}", dump.display());
        return EXIT_CONFIG;
    }
    let u = p.u.clone();
    let report = match run_diagnostics(&p, &u, &cfg.probes, &cfg.enabled_probes) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(c) = ctx.write(&ctx.out_dir(Some(&cfg)), "report.json", &report.to_json()) {
        return c;
    }
    for r in &report.records {
        let margin = r.min_margin.map_or_else(|| "-".to_string(), |m| format!("{m:+.3e}"));
        ctx.say(format!("{:<18} {:<14} margin {margin}", r.probe, serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()));
    }
    if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
