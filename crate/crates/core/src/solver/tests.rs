use super::*;
use crate::grid::{boundary_fn, DomainSpec, GridProblem, PhaseSpec};
use crate::operator::{phase_of, SymMatrix};
use std::f64::consts::FRAC_PI_2;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn quad3(x: &[f64]) -> f64 {
    // Hessian [[2, 0.5, 0], [0.5, 1, 0.2], [0, 0.2, 0.5]]
    x[0] * x[0] + 0.5 * x[0] * x[1] + 0.5 * x[1] * x[1] + 0.2 * x[1] * x[2] + 0.25 * x[2] * x[2] - 0.7 * x[2] + 1.0
}

#[test]
fn config_validation() {
    assert!(SolverConfig::default().validate().is_ok());
    let mut c = SolverConfig::default();
    c.armijo_c = 1.0;
    assert!(c.validate().is_err());
    let mut c = SolverConfig::default();
    c.backtrack_factor = 0.0;
    assert!(c.validate().is_err());
    let mut c = SolverConfig::default();
    c.newton_tol = -1.0;
    assert!(c.validate().is_err());
}

#[test]
fn initial_guess_has_constant_start_phase() {
    let theta0 = FRAC_PI_2 + 0.3;
    let p = GridProblem::build(DomainSpec::ball(3, 1.0, 0.25), boundary_fn(quad3), PhaseSpec::constant(3, theta0)).unwrap();
    let u = initial_guess(&p, theta0);
    // nodes whose stencils close on unknowns see the Hessian of q itself
    for i in (0..p.len()).filter(|&i| p.node(i).class == crate::grid::NodeClass::Interior) {
        let f = phase_of(&p.hessian_of(&u, i)).unwrap();
        assert!((f - theta0).abs() < 1e-12, "{}", f - theta0);
    }
    let p = GridProblem::build(DomainSpec::ball(3, 1.0, 0.25), boundary_fn(|_| 0.0), PhaseSpec::constant(3, 0.0)).unwrap();
    let u = initial_guess(&p, 3.0 * FRAC_PI_2 / 2.0);
    // q = |x|²/2 shifted by a constant fit on the sphere
    let c = p.center_node().unwrap();
    for i in 0..p.len() {
        let r2: f64 = p.node(i).x.iter().map(|v| v * v).sum();
        assert!((u[i] - u[c] - r2 / 2.0).abs() < 1e-9);
    }
}

#[test]
fn quadratic_solution_recovered_exactly() {
    let m = SymMatrix::from_fn(3, |r, c| [[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 0.5]][r][c]);
    let theta = phase_of(&m).unwrap();
    for h in [0.25, 0.2] {
        let mut p = GridProblem::build(DomainSpec::ball(3, 1.0, h), boundary_fn(quad3), PhaseSpec::constant(3, theta)).unwrap();
        p.u = initial_guess(&p, theta);
        let trace = newton_solve(&mut p, &SolverConfig::default(), 0).unwrap();
        assert!(trace.last().unwrap().residual_max <= 1e-8);
        assert!(max_abs_diff(&p.u, &p.sample(quad3)) < 1e-8);
        assert!(trace.windows(2).all(|w| w[1].residual_max < w[0].residual_max));
    }
}

fn manufactured(x: &[f64]) -> f64 {
    0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.2 * (x[0] + 0.3).sin() * (0.7 * x[1]).cos()
}

fn manufactured_hessian(x: &[f64]) -> SymMatrix {
    let (s, c) = ((x[0] + 0.3).sin(), (x[0] + 0.3).cos());
    let (s2, c2) = ((0.7 * x[1]).sin(), (0.7 * x[1]).cos());
    SymMatrix::from_fn(2, |r, k| match (r, k) {
        (0, 0) => 1.0 - 0.2 * s * c2,
        (1, 1) => 1.0 - 0.2 * 0.49 * s * c2,
        _ => -0.2 * 0.7 * c * s2,
    })
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let mut errs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let phase = PhaseSpec::from_fn(2, "manufactured", |x| phase_of(&manufactured_hessian(x)).unwrap());
        let mut p = GridProblem::build(DomainSpec::ball(2, 1.0, h), boundary_fn(manufactured), phase).unwrap();
        p.u = initial_guess(&p, 1.2);
        newton_solve(&mut p, &SolverConfig::default(), 0).unwrap();
        errs.push(max_abs_diff(&p.u, &p.sample(manufactured)));
    }
    for k in 0..2 {
        let slope = (errs[k] / errs[k + 1]).log2();
        assert!((1.7..=2.3).contains(&slope), "slope {slope} from {errs:?}");
    }
}

#[test]
fn supercritical_baseline_converges_quickly() {
    let theta = FRAC_PI_2 + 0.3;
    let mut p = GridProblem::build(
        DomainSpec::ball(3, 1.0, 0.125),
        boundary_fn(|x| x[0] * x[0] - 0.3 * x[2]),
        PhaseSpec::constant(3, theta),
    )
    .unwrap();
    p.u = initial_guess(&p, theta);
    let trace = newton_solve(&mut p, &SolverConfig::default(), 0).unwrap();
    assert!(trace.len() - 1 <= 25, "{} iterations", trace.len() - 1);
    assert!(trace.last().unwrap().residual_max <= 1e-8);
}

#[test]
fn trivial_continuation_equals_newton() {
    let theta = FRAC_PI_2 + 0.4;
    let phi = boundary_fn(|x| x[0] * x[0] - 0.3 * x[2]);
    let domain = DomainSpec::ball(3, 1.0, 0.25);
    let cfg = SolverConfig::default();
    let mut a = GridProblem::build(domain.clone(), phi.clone(), PhaseSpec::constant(3, theta)).unwrap();
    a.u = initial_guess(&a, theta);
    newton_solve(&mut a, &cfg, 0).unwrap();
    let mut b = GridProblem::build(domain, phi, PhaseSpec::constant(3, theta)).unwrap();
    let path = ContinuationPath::uniform(theta, PhaseSpec::constant(3, theta), 1);
    let out = continuation_solve(&mut b, &path, &cfg).unwrap();
    assert_eq!(out.u, a.u);
    assert_eq!(out.stages.len(), 2);
    assert_eq!(out.stages[1].trace.len(), 1);
}

#[test]
fn continuation_reaches_critical_phase() {
    let mut p = GridProblem::build(
        DomainSpec::ball(3, 1.0, 0.25),
        boundary_fn(|x| x[0] * x[0] - 0.3 * x[2]),
        PhaseSpec::constant(3, FRAC_PI_2),
    )
    .unwrap();
    let path = ContinuationPath::uniform(FRAC_PI_2 + 0.4, PhaseSpec::constant(3, FRAC_PI_2), 8);
    let out = continuation_solve(&mut p, &path, &SolverConfig::default()).unwrap();
    assert_eq!(out.stages.len(), 9);
    assert!(out.final_residual() <= 1e-8);
    assert!(p.residual().unwrap().iter().all(|r| r.abs() <= 1e-8));
    assert_eq!(p.classification(), crate::operator::PhaseClass::Critical);
}

#[test]
fn clipped_phase_continuation_records_depth() {
    let target = PhaseSpec::from_fn(3, "max(pi/2, pi/2 + 0.2 x1)", |x| (FRAC_PI_2 + 0.2 * x[0]).max(FRAC_PI_2));
    let mut p = GridProblem::build(DomainSpec::ball(3, 1.0, 0.25), boundary_fn(|x| x[0] * x[0] - 0.3 * x[2]), target.clone()).unwrap();
    let path = ContinuationPath::uniform(FRAC_PI_2 + 0.4, target, 4);
    let out = continuation_solve(&mut p, &path, &SolverConfig::default()).unwrap();
    assert!(out.final_residual() <= 1e-8);
    assert!(out.max_depth <= SolverConfig::default().max_bisections);
}

#[test]
fn failed_stage_is_bisected_then_reported() {
    let mut cfg = SolverConfig::default();
    cfg.max_newton_iters = 1;
    cfg.max_bisections = 2;
    let mut p = GridProblem::build(
        DomainSpec::ball(2, 1.0, 0.25),
        boundary_fn(|x| 0.6f64.tan() / 2.0 * (x[0] * x[0] + x[1] * x[1])),
        PhaseSpec::constant(2, -1.0),
    )
    .unwrap();
    let path = ContinuationPath::uniform(1.2, PhaseSpec::constant(2, -1.0), 1);
    match continuation_solve(&mut p, &path, &cfg) {
        Err(SolverError::Continuation { s, depth, stages, .. }) => {
            // 1 fails, then 1/2, then 1/4 at the deepest allowed level
            assert_eq!((s, depth), (0.25, 2));
            assert_eq!(stages.len(), 1);
        }
        other => panic!("expected continuation failure, got {other:?}"),
    }
}

#[test]
fn invalid_paths_rejected() {
    let p = ContinuationPath::uniform(0.2, PhaseSpec::constant(3, FRAC_PI_2), 4);
    assert!(matches!(p.validate(), Err(SolverError::InvalidPath(_))));
    let mut p = ContinuationPath::uniform(2.0, PhaseSpec::constant(3, FRAC_PI_2), 4);
    p.schedule = vec![0.0, 0.5, 0.5, 1.0];
    assert!(p.validate().is_err());
}

#[test]
fn comparison_orders_zero_boundary_solutions() {
    let domain = DomainSpec::ball(3, 1.0, 0.25);
    let phi = boundary_fn(|_| 0.0);
    let cfg = SolverConfig::default();
    let solve = |theta: f64| {
        let mut p = GridProblem::build(domain.clone(), phi.clone(), PhaseSpec::constant(3, theta)).unwrap();
        let path = ContinuationPath::uniform(FRAC_PI_2 + 0.4, PhaseSpec::constant(3, theta), 4);
        continuation_solve(&mut p, &path, &cfg).unwrap();
        p
    };
    let a = solve(FRAC_PI_2);
    let b = solve(FRAC_PI_2 + 0.2);
    let r = comparison_check(&a, &b, &a.u, &b.u, 10.0 * 0.25 * 0.25).unwrap();
    assert!(r.holds && r.max_violation <= 0.0);
    assert!(a.u.iter().all(|&v| v <= 1e-12));
    // swapped roles violate the phase ordering precondition
    assert!(comparison_check(&b, &a, &b.u, &a.u, 0.1).is_err());
}

#[test]
fn radial_gap_matches_closed_form() {
    // constant phase with radial boundary data: the solution is the
    // quadratic tan(θ/n)/2·(|x|² − 1), so the centre gap is explicit
    let domain = DomainSpec::ball(3, 1.0, 0.2);
    let phi = boundary_fn(|_| 0.0);
    let cfg = SolverConfig::default();
    let solve = |theta: f64| {
        let mut p = GridProblem::build(domain.clone(), phi.clone(), PhaseSpec::constant(3, theta)).unwrap();
        p.u = initial_guess(&p, theta);
        newton_solve(&mut p, &cfg, 0).unwrap();
        p
    };
    let (ta, tb) = (FRAC_PI_2 + 0.1, FRAC_PI_2 + 0.4);
    let a = solve(ta);
    let b = solve(tb);
    let c = a.center_node().unwrap();
    let gap = a.u[c] - b.u[c];
    let want = ((tb / 3.0).tan() - (ta / 3.0).tan()) / 2.0;
    assert!((gap - want).abs() < 1e-8, "{gap} vs {want}");
}

#[test]
fn lipschitz_probe_on_quadratic() {
    let p = GridProblem::build(DomainSpec::ball(2, 1.0, 0.1), boundary_fn(|_| 0.0), PhaseSpec::constant(2, 0.0)).unwrap();
    let u = p.sample(|x| x[0] * x[0] + 0.5 * x[1]);
    let probe = translation_lipschitz_probe(&p, &u, 0).unwrap();
    // exact difference quotient of x² is the derivative at the midpoint
    let (mut wi, mut wb): (f64, f64) = (0.0, 0.0);
    for i in 0..p.len() {
        if let Some(j) = p.neighbor(i, 0, true) {
            let v = (p.node(i).x[0] + p.node(j).x[0]).abs();
            if p.node(i).class == crate::grid::NodeClass::Interior && p.node(j).class == crate::grid::NodeClass::Interior {
                wi = wi.max(v);
            } else {
                wb = wb.max(v);
            }
        }
    }
    assert!((probe.interior_max - wi).abs() < 1e-10 && (probe.boundary_max - wb).abs() < 1e-10);
    // the symmetric axis shifts of a radial field agree
    let r = p.sample(|x| x[0] * x[0] + x[1] * x[1]);
    let (a, b) = (translation_lipschitz_probe(&p, &r, 0).unwrap(), translation_lipschitz_probe(&p, &r, 1).unwrap());
    assert!((a.interior_max - b.interior_max).abs() < 1e-12 && (a.boundary_max - b.boundary_max).abs() < 1e-12);
}

#[test]
fn trace_csv_layout() {
    let rows = vec![TraceRow { stage: 0, iter: 0, residual_max: 0.5, step_length: 0.0, lambda1_max: 2.0, lambdan_min: -1.0 }];
    assert_eq!(trace_csv(&rows), "stage,iter,residual_max,step_length,lambda1_max,lambdan_min\n0,0,5e-1,0e0,2e0,-1e0\n");
}
