//! End-to-end checks of the command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lagphase::cli::{self, cmd_verify_lemmas, Context, LemmaArgs, EXIT_CONFIG, EXIT_OK, EXIT_SAMPLER, EXIT_SOLVER};
use lagphase::operator::LevelSampler;
use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["lagphase", "--quiet"];
    full.extend_from_slice(args);
    cli::run(full)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn no_temp_files(dir: &Path) {
    for e in fs::read_dir(dir).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        assert!(!name.ends_with(".tmp"), "leftover {name}");
    }
}

#[test]
fn solve_quadratic_reports_small_error() {
    let out = TempDir::new().unwrap();
    let cfg = configs().join("quadratic.cfg");
    assert_eq!(run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]), EXIT_OK);
    let s = json(&out.path().join("summary.json"));
    assert_eq!(s["converged"], true);
    assert!(s["solution_error"].as_f64().unwrap() < 1e-8);
    assert!(s["final_residual"].as_f64().unwrap() <= 1e-8);
    for f in ["solution.csv", "solution.txt", "trace.csv"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    no_temp_files(out.path());
}

#[test]
fn binary_rejects_out_of_range_phase() {
    let cfg = configs().join("out_of_range.cfg");
    let out = Command::new(env!("CARGO_BIN_EXE_lagphase"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("phase out of range"));
}

#[test]
fn binary_reports_config_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.cfg",
        "domain.kind = ball\ndomain.dim = 2\ndomain.radius = 1\ndomain.h = 0.25\nphase.theta = 0.5\nboundary.phi = r2\nsolver.tolerance = 1\n",
    );
    let out = Command::new(env!("CARGO_BIN_EXE_lagphase")).args(["solve", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7") && err.contains("solver.tolerance"), "{err}");
}

#[test]
fn solver_failure_writes_trace() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("critical_ball.cfg")).unwrap()
        + "solver.max_newton_iters = 1\nsolver.max_bisections = 0\n";
    let cfg = write_config(dir.path(), "fail.cfg", &text);
    let out = dir.path().join("out");
    assert_eq!(run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_SOLVER);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("stage,iter,residual_max,step_length,lambda1_max,lambdan_min\n"));
    assert!(trace.lines().count() > 1);
    assert_eq!(json(&out.join("summary.json"))["converged"], false);
}

#[test]
fn verify_lemmas_exit_codes() {
    let out = TempDir::new().unwrap();
    let o = out.path().to_str().unwrap();
    assert_eq!(run(&["verify-lemmas", "--n", "3", "--count", "300", "--seed", "1", "--out", o]), EXIT_OK);
    let r = json(&out.path().join("lemmas.json"));
    assert_eq!(r["all_pass"], true);
    assert_eq!(r["suites"].as_array().unwrap().len(), 6);
    assert_eq!(r["expected_failures"][0]["violation_found"], true);
    assert_eq!(run(&["verify-lemmas", "--n", "3", "--count", "0", "--seed", "1", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["verify-lemmas", "--n", "5", "--count", "10", "--seed", "1", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["verify-lemmas", "--n", "3", "--count", "10", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["verify-lemmas", "--n", "2", "--count", "300", "--seed", "1", "--out", o]), EXIT_OK);
    assert!(json(&out.path().join("lemmas.json"))["expected_failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_lemmas_sampler_exhaustion() {
    let out = TempDir::new().unwrap();
    let args = LemmaArgs {
        n: 3,
        count: 10,
        seed: 1,
        sampler: LevelSampler { log_low: 3.0, log_high: 3.1, max_retries: 5, max_abs_closing: 1e-3 },
    };
    let ctx = Context { out: Some(out.path().to_path_buf()), quiet: true };
    assert_eq!(cmd_verify_lemmas(&args, &ctx), EXIT_SAMPLER);
}

#[test]
fn convergence_exact_and_single_level() {
    let out = TempDir::new().unwrap();
    let o = out.path().to_str().unwrap();
    let q = configs().join("quadratic.cfg");
    assert_eq!(run(&["convergence", "--config", q.to_str().unwrap(), "--levels", "2", "--out", o]), EXIT_OK);
    let table = fs::read_to_string(out.path().join("convergence.csv")).unwrap();
    let last: Vec<&str> = table.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(last[4], "exact");
    assert!(last[3].parse::<f64>().unwrap() < 1e-8);

    let d = configs().join("manufactured_disc.cfg");
    assert_eq!(run(&["convergence", "--config", d.to_str().unwrap(), "--levels", "1", "--out", o]), EXIT_OK);
    let table = fs::read_to_string(out.path().join("convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert_eq!(table.lines().nth(1).unwrap().split(',').nth(4), Some(""));

    let c = configs().join("critical_ball.cfg");
    assert_eq!(run(&["convergence", "--config", c.to_str().unwrap(), "--levels", "2", "--out", o]), EXIT_CONFIG);
}

#[test]
fn convergence_solver_failure() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("manufactured_disc.cfg")).unwrap()
        + "solver.max_newton_iters = 1\nsolver.max_bisections = 0\n";
    let cfg = write_config(dir.path(), "fail.cfg", &text);
    let o = dir.path().join("out");
    assert_eq!(run(&["convergence", "--config", &cfg, "--levels", "2", "--out", o.to_str().unwrap()]), EXIT_SOLVER);
}

fn solve_to(cfg: &Path, out: &Path) {
    assert_eq!(run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK);
}

#[test]
fn diagnose_quadratic_and_mismatch() {
    let dir = TempDir::new().unwrap();
    let q = configs().join("quadratic.cfg");
    let sol = dir.path().join("sol");
    solve_to(&q, &sol);
    let dump = sol.join("solution.csv");
    let rep = dir.path().join("rep");
    let code = run(&["diagnose", "--config", q.to_str().unwrap(), "--dump", dump.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let r = json(&rep.join("report.json"));
    assert!(r["records"].as_array().unwrap().iter().all(|x| x["status"] != "fail"));

    let d = configs().join("manufactured_disc.cfg");
    let code = run(&["diagnose", "--config", d.to_str().unwrap(), "--dump", dump.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    let missing = dir.path().join("missing.csv");
    let code = run(&["diagnose", "--config", q.to_str().unwrap(), "--dump", missing.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn diagnose_subcritical_runs_only_gradient_probe() {
    let dir = TempDir::new().unwrap();
    let c = configs().join("subcritical_cone.cfg");
    let sol = dir.path().join("sol");
    solve_to(&c, &sol);
    let dump = sol.join("solution.csv");
    let rep = dir.path().join("rep");
    run(&["diagnose", "--config", c.to_str().unwrap(), "--dump", dump.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    let r = json(&rep.join("report.json"));
    for rec in r["records"].as_array().unwrap() {
        let expected = if rec["probe"] == "gradient_max_principle" { "pass" } else { "not_applicable" };
        assert_eq!(rec["status"], expected, "{rec}");
        assert_eq!(rec["regime"], "subcritical");
    }
}

/// Margins of the critical-ball baseline, frozen from the reference run.
const BASELINE: [(&str, f64); 4] = [
    ("jacobi_pointwise", 0.010165451890845),
    ("jacobi_integral", 0.5123283644959767),
    ("gradient_max_principle", 2.9374111942974395),
    ("eigen_field", 0.9358057354413063),
];

#[test]
fn critical_ball_baseline_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let c = configs().join("critical_ball.cfg");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    solve_to(&c, &a);
    solve_to(&c, &b);
    for f in ["solution.csv", "trace.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let rep = dir.path().join("rep");
    let dump = a.join("solution.csv");
    let code = run(&["diagnose", "--config", c.to_str().unwrap(), "--dump", dump.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let r = json(&rep.join("report.json"));
    for (probe, frozen) in BASELINE {
        let rec = r["records"].as_array().unwrap().iter().find(|x| x["probe"] == probe).unwrap();
        let m = rec["min_margin"].as_f64().unwrap();
        assert!((m - frozen).abs() < 1e-8, "{probe}: {m} vs frozen {frozen}");
    }
}
