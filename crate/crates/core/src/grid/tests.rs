use super::*;
use crate::operator::{critical_phase, phase_of};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

fn zero_phi() -> BoundaryFn {
    boundary_fn(|_| 0.0)
}

fn problem(domain: DomainSpec, phi: BoundaryFn, theta: f64) -> GridProblem {
    let n = domain.dim;
    GridProblem::build(domain, phi, PhaseSpec::constant(n, theta)).unwrap()
}

#[test]
fn unit_box_coarse_has_single_center_node() {
    let p = problem(DomainSpec::cube(2, 0.5, 0.5), zero_phi(), 0.0);
    assert_eq!(p.len(), 1);
    assert_eq!(p.node(0).x, vec![0.0, 0.0]);
    assert_eq!(p.node(0).class, NodeClass::BoundaryAdjacent);
    assert_eq!(p.center_node(), Some(0));
}

#[test]
fn unit_ball_matches_brute_force_classifier() {
    let h = 0.4;
    let p = problem(DomainSpec::ball(2, 1.0, h), zero_phi(), 0.0);
    // brute force: strictly inside points, interior iff all 8 neighbours inside
    let inside = |i: i64, j: i64| ((i * i + j * j) as f64).sqrt() * h < 1.0 - 1e-12;
    let mut want = Vec::new();
    for i in -3i64..=3 {
        for j in -3i64..=3 {
            if inside(i, j) {
                let full = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]
                    .iter()
                    .all(|(a, b)| inside(i + a, j + b));
                want.push((vec![i, j], full));
            }
        }
    }
    assert_eq!(p.len(), want.len());
    assert_eq!(p.len(), 21);
    for (node, (k, full)) in p.nodes().iter().zip(&want) {
        assert_eq!(&node.lattice, k);
        assert_eq!(node.class == NodeClass::Interior, *full);
    }
}

#[test]
fn coarse_spacing_keeps_origin_and_bad_spacing_fails() {
    let r = GridProblem::build(DomainSpec::cube(2, 0.1, 0.5), zero_phi(), PhaseSpec::constant(2, 0.0));
    // the origin is still strictly inside a box of half-width 0.1
    assert_eq!(r.unwrap().len(), 1);
    let r = GridProblem::build(
        DomainSpec::ellipsoid(vec![0.2, 0.2], 0.5).with_spacing(0.5),
        zero_phi(),
        PhaseSpec::constant(2, 0.0),
    );
    assert!(r.is_ok());
    let r = GridProblem::build(DomainSpec::ball(2, 1.0, -0.1), zero_phi(), PhaseSpec::constant(2, 0.0));
    assert!(matches!(r, Err(GridError::InvalidDomain(_))));
}

#[test]
fn critical_constant_phase_classified() {
    let p = problem(DomainSpec::ball(3, 1.0, 0.25), zero_phi(), FRAC_PI_2);
    assert!(p.theta().iter().all(|&t| t == FRAC_PI_2));
    assert_eq!(p.classification(), PhaseClass::Critical);
    let r = GridProblem::build(DomainSpec::ball(3, 1.0, 0.25), zero_phi(), PhaseSpec::constant(3, 1.5 * std::f64::consts::PI));
    assert!(matches!(r, Err(GridError::PhaseOutOfRange { .. })));
}

fn quad(x: &[f64]) -> f64 {
    // Hessian [[2, 1, 0.5], [1, -1, 0], [0.5, 0, 3]] plus affine part
    let (a, b, c) = (x[0], x[1], *x.get(2).unwrap_or(&0.0));
    a * a + a * b + 0.5 * a * c - 0.5 * b * b + 1.5 * c * c + 0.3 * a - b + 2.0
}

#[test]
fn stencils_exact_on_quadratics_everywhere() {
    for domain in [DomainSpec::ball(3, 1.0, 0.2), DomainSpec::cube(3, 0.5, 0.15), DomainSpec::ellipsoid(vec![1.0, 0.6, 0.8], 0.2)] {
        let mut p = problem(domain, boundary_fn(quad), 0.0);
        p.u = p.sample(quad);
        let want = [[2.0, 1.0, 0.5], [1.0, -1.0, 0.0], [0.5, 0.0, 3.0]];
        for i in 0..p.len() {
            let (m, g) = p.discrete_hessian(i);
            let x = &p.node(i).x;
            let gw = [2.0 * x[0] + x[1] + 0.5 * x[2] + 0.3, x[0] - x[1] - 1.0, 0.5 * x[0] + 3.0 * x[2]];
            for r in 0..3 {
                assert!((g[r] - gw[r]).abs() < 1e-9, "grad {r} at {x:?}: {} vs {}", g[r], gw[r]);
                for c in 0..3 {
                    assert!((m.get(r, c) - want[r][c]).abs() < 1e-7, "({r},{c}) at {x:?}: {}", m.get(r, c));
                }
            }
        }
    }
}

#[test]
fn regular_node_pure_and_mixed_entries() {
    let mut p = problem(DomainSpec::ball(2, 1.0, 0.1), zero_phi(), 0.0);
    let c = p.center_node().unwrap();
    p.u = p.sample(|x| x[0] * x[0]);
    let (m, _) = p.discrete_hessian(c);
    assert!((m.get(0, 0) - 2.0).abs() < 1e-10 && m.get(0, 1).abs() < 1e-10 && m.get(1, 1).abs() < 1e-10);
    p.u = p.sample(|x| x[0] * x[1]);
    let (m, _) = p.discrete_hessian(c);
    assert!((m.get(0, 1) - 1.0).abs() < 1e-10);
}

#[test]
fn smooth_hessian_second_order_at_regular_nodes() {
    let f = |x: &[f64]| x[0].sin() * x[1].cos();
    let hess = |x: &[f64]| {
        let (s0, c0, s1, c1) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
        [[-s0 * c1, -c0 * s1], [-c0 * s1, -s0 * c1]]
    };
    let mut errs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let mut p = problem(DomainSpec::ball(2, 1.0, h), zero_phi(), 0.0);
        p.u = p.sample(f);
        let mut e: f64 = 0.0;
        for i in 0..p.len() {
            if p.node(i).class != NodeClass::Interior {
                continue;
            }
            let (m, _) = p.discrete_hessian(i);
            let w = hess(&p.node(i).x);
            for r in 0..2 {
                for c in 0..2 {
                    e = e.max((m.get(r, c) - w[r][c]).abs());
                }
            }
        }
        errs.push(e);
    }
    for k in 0..2 {
        let slope = (errs[k] / errs[k + 1]).log2();
        assert!((1.7..=2.3).contains(&slope), "slope {slope} from {errs:?}");
    }
}

#[test]
fn residual_vanishes_for_matching_quadratic() {
    let m = SymMatrix::from_fn(3, |r, c| [[2.0, 1.0, 0.5], [1.0, -1.0, 0.0], [0.5, 0.0, 3.0]][r][c]);
    let theta = phase_of(&m).unwrap();
    let mut p = problem(DomainSpec::ball(3, 1.0, 0.25), boundary_fn(quad), theta);
    p.u = p.sample(quad);
    let r = p.residual().unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-10), "{:?}", r.iter().fold(0.0f64, |a, v| a.max(v.abs())));
}

#[test]
fn residual_is_local_to_stencil_footprint() {
    let mut p = problem(DomainSpec::ball(2, 1.0, 0.2), boundary_fn(quad), 0.3);
    p.u = p.sample(|x| x[0] * x[0] + 0.3 * x[1].sin());
    let base = p.residual().unwrap();
    let k = p.len() / 3;
    let mut v = p.u.clone();
    v[k] += 1e-3;
    let pert = p.residual_of(&v).unwrap();
    for a in 0..p.len() {
        let touches = a == k || p.stencil(a).footprint().contains(&k);
        assert_eq!(pert[a] != base[a], touches, "node {a}");
    }
}

#[test]
fn jacobian_at_zero_is_the_laplacian() {
    let h = 0.125;
    let p = problem(DomainSpec::cube(2, 0.5, h), zero_phi(), 0.0);
    let j = p.assemble_jacobian().unwrap();
    for a in 0..p.len() {
        assert!((j.get(a, a) + 4.0 / (h * h)).abs() < 1e-9);
        for axis in 0..2 {
            for fwd in [true, false] {
                if let Some(b) = p.neighbor(a, axis, fwd) {
                    assert!((j.get(a, b) - 1.0 / (h * h)).abs() < 1e-9);
                }
            }
        }
        let offdiag: f64 = j.row(a).filter(|&(c, _)| c != a).map(|(_, v)| v.abs()).sum();
        let count = (0..2)
            .flat_map(|ax| [true, false].map(|f| p.neighbor(a, ax, f)))
            .flatten()
            .count();
        assert!((offdiag - count as f64 / (h * h)).abs() < 1e-9);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (domain, theta) in [(DomainSpec::ball(2, 1.0, 0.25), 0.7), (DomainSpec::ball(3, 1.0, 0.34), critical_phase(3) + 0.2)] {
        let mut p = problem(domain, boundary_fn(quad), theta);
        assert!(p.len() <= 100);
        p.u = (0..p.len()).map(|i| quad(&p.node(i).x) + 0.05 * rng.random_range(-1.0..1.0)).collect();
        let j = p.assemble_jacobian().unwrap();
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        let scale = j.vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for b in 0..p.len() {
            let mut up = p.u.clone();
            let mut dn = p.u.clone();
            up[b] += eps;
            dn[b] -= eps;
            let (rp, rm) = (p.residual_of(&up).unwrap(), p.residual_of(&dn).unwrap());
            for a in 0..p.len() {
                let fd = (rp[a] - rm[a]) / (2.0 * eps);
                worst = worst.max((fd - j.get(a, b)).abs() / scale);
            }
        }
        assert!(worst < 1e-6, "relative error {worst}");
    }
}

#[test]
fn u_dependent_phase_enters_the_diagonal() {
    let n = 2;
    let phase = PhaseSpec::from_fn_xu(n, "0.3 + 0.1u", |_, u| 0.3 + 0.1 * u);
    let mut p = GridProblem::build(DomainSpec::ball(n, 1.0, 0.25), boundary_fn(quad), phase).unwrap();
    p.u = p.sample(|x| x[0] * x[0] - x[1]);
    let j = p.assemble_jacobian().unwrap();
    let eps = 1e-6;
    let a = p.center_node().unwrap();
    let mut up = p.u.clone();
    let mut dn = p.u.clone();
    up[a] += eps;
    dn[a] -= eps;
    let fd = (p.residual_of(&up).unwrap()[a] - p.residual_of(&dn).unwrap()[a]) / (2.0 * eps);
    assert!((fd - j.get(a, a)).abs() / fd.abs() < 1e-6);
}

#[test]
fn dump_round_trip_is_exact() {
    let mut p = problem(DomainSpec::ball(2, 1.0, 0.25), boundary_fn(quad), 0.4);
    p.u = p.sample(|x| (x[0] * 3.0).sin() / 7.0 + x[1]);
    let r = p.residual().unwrap();
    let text = dump_csv(&p, &r);
    assert!(text.starts_with("node_index,x1,x2,class,u,theta,residual\n"));
    let d = read_dump(&text).unwrap();
    assert_eq!(d.u(), p.u);
    assert_eq!(d.rows.iter().map(|r| r.residual).collect::<Vec<_>>(), r);
    let mut q = problem(DomainSpec::ball(2, 1.0, 0.25), boundary_fn(quad), 0.4);
    d.apply_to(&mut q).unwrap();
    assert_eq!(q.u, p.u);
    let mut other = problem(DomainSpec::ball(2, 1.0, 0.2), boundary_fn(quad), 0.4);
    assert!(matches!(d.apply_to(&mut other), Err(GridError::SignatureMismatch(_))));
    assert!(node_table(&p, &r).lines().count() == p.len() + 1);
}

mod props {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        /// Every node reproduces the Hessian of an arbitrary quadratic.
        #[test]
        fn discrete_hessian_exact_on_random_quadratics(
            a in proptest::collection::vec(-3.0f64..3.0, 6),
            b in proptest::collection::vec(-1.0f64..1.0, 3),
            h in 0.15f64..0.4,
        ) {
            let m = SymMatrix::from_fn(3, |i, j| a[i.min(j) * 3 - i.min(j) * (i.min(j) + 1) / 2 + i.max(j)]);
            let mq = m.clone();
            let q = move |x: &[f64]| {
                let mut s = 0.0;
                for i in 0..3 {
                    s += b[i] * x[i];
                    for j in 0..3 {
                        s += 0.5 * mq.get(i, j) * x[i] * x[j];
                    }
                }
                s
            };
            let p = GridProblem::build(DomainSpec::ellipsoid(vec![1.0, 0.8, 0.6], h), boundary_fn(q.clone()), PhaseSpec::constant(3, 0.0)).unwrap();
            let u = p.sample(&q);
            for i in 0..p.len() {
                let d = p.hessian_of(&u, i);
                for r in 0..3 {
                    for c in 0..3 {
                        prop_assert!((d.get(r, c) - m.get(r, c)).abs() < 1e-7 * (1.0 + m.get(r, c).abs()), "node {i} ({r},{c})");
                    }
                }
            }
        }

        /// Dumps read back to the same coordinates, classes and values.
        #[test]
        fn dump_round_trip_is_exact_for_random_fields(seed in 0u64..1000, h in 0.2f64..0.5) {
            let mut p = problem(DomainSpec::ball(2, 1.0, h), zero_phi(), 0.3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            p.u = (0..p.len()).map(|_| rng.random_range(-1e3..1e3)).collect();
            let r = p.residual().unwrap();
            let dump = read_dump(&dump_csv(&p, &r)).unwrap();
            dump.check_signature(&p).unwrap();
            prop_assert_eq!(dump.u(), p.u.clone());
        }
    }
}
