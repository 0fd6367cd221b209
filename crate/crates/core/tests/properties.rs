//! Property tests for the invariants that cut across modules.

use neumann_pme::graph::{
    classify_with, make_selection, phi_from_beta, ClassifyOptions, MonotoneGraph, SelectionPolicy,
};
use neumann_pme::mirror::{asymmetry, extend_beta, extend_phi, DensityField, Grid1D};
use neumann_pme::numerics::integrate;
use neumann_pme::particle::{estimate_density, fold, Estimator, ParticleEnsemble, Scheme};
use neumann_pme::pde::{selection_violation, solve, SolveOptions, SolverMethod, SolverOptions};
use neumann_pme::rng::NoiseStream;
use neumann_pme::testfn::{make_bump, mollify_even};
use proptest::prelude::*;

fn catalog() -> Vec<MonotoneGraph> {
    vec![
        MonotoneGraph::identity(),
        MonotoneGraph::linear(2.5),
        MonotoneGraph::stopped_linear(1.0).unwrap(),
        MonotoneGraph::saturating(),
        MonotoneGraph::jump(1.0, 0.5, 2.0).unwrap(),
        MonotoneGraph::from_table(&[(0.0, 0.0), (0.5, 0.1), (0.5, 0.4), (2.0, 1.0)]).unwrap(),
    ]
}

fn graph() -> impl Strategy<Value = MonotoneGraph> {
    (0..catalog().len()).prop_map(|i| catalog().swap_remove(i))
}

proptest! {
    #[test]
    fn resolvent_consistency(b in graph(), mu in 1e-3f64..50.0, y in 0.0f64..10.0) {
        let (u, eta) = b.resolvent(mu, y).unwrap();
        prop_assert!((u + mu * eta - y).abs() <= 1e-12 * y.max(1.0));
        prop_assert!(b.eval(u).unwrap().contains(eta, 1e-10));
    }

    #[test]
    fn resolvent_monotone(b in graph(), mu in 1e-3f64..50.0, y1 in 0.0f64..10.0, dy in 0.0f64..5.0) {
        let (u1, _) = b.resolvent(mu, y1).unwrap();
        let (u2, _) = b.resolvent(mu, y1 + dy).unwrap();
        prop_assert!(u1 <= u2);
    }

    #[test]
    fn phi_round_trip(b in graph(), u in 1e-3f64..20.0) {
        let iv = b.eval(u).unwrap();
        prop_assume!(iv.is_point());
        let phi = phi_from_beta(&b).eval(u).unwrap();
        prop_assert!((phi.lo * phi.lo * u - iv.lo).abs() <= 1e-10 * iv.lo.abs().max(1.0));
    }

    #[test]
    fn selections_stay_in_the_filled_graph(b in graph(), u in 0.0f64..10.0, p in 0usize..3) {
        let policy = [SelectionPolicy::LeftLimit, SelectionPolicy::Midpoint, SelectionPolicy::RightLimit][p];
        let s = make_selection(&b, policy);
        prop_assert!(b.eval(u).unwrap().contains(s.select(u), 0.0));
        let phi = phi_from_beta(&b);
        let sp = make_selection(&phi, policy);
        prop_assert!(phi.eval(u).unwrap().contains(sp.select(u), 1e-15));
    }

    #[test]
    fn extension_commutes_with_phi(b in graph(), u in 0.0f64..10.0) {
        let lhs = phi_from_beta(&extend_beta(&b)).eval(u).unwrap();
        let rhs = extend_phi(&phi_from_beta(&b)).eval(u).unwrap();
        prop_assert!((lhs.lo - rhs.lo).abs() <= 1e-10 && (lhs.hi - rhs.hi).abs() <= 1e-10, "{lhs:?} {rhs:?}");
    }

    #[test]
    fn whole_line_evolution_stays_even(
        half in prop::collection::vec(0.0f64..3.0, 3..25),
        which in 0usize..6,
        gs in any::<bool>(),
    ) {
        prop_assume!(half.iter().sum::<f64>() > 0.1);
        let b = extend_beta(&catalog()[which]);
        let mut vals: Vec<f64> = half.iter().rev().cloned().collect();
        vals.extend(&half);
        let g = Grid1D::symmetric(0.1, 0.1 * half.len() as f64).unwrap();
        let u0 = DensityField::new(g, vals, 0.0).unwrap().normalized().unwrap();
        let method = if gs { SolverMethod::GaussSeidel } else { SolverMethod::Newton };
        let opts = SolveOptions::new(0.2, 0.02)
            .snapshots(&[0.1, 0.2])
            .solver(SolverOptions { method, ..Default::default() })
            .skip_validation(true);
        let traj = solve(&u0, &b, &opts).unwrap();
        prop_assert!(traj.conservation.max_asymmetry.unwrap() <= 1e-12);
        for s in &traj.snapshots {
            prop_assert!(asymmetry(&g, s.u.values()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn eta_is_a_selection(half in prop::collection::vec(0.0f64..4.0, 2..25), which in 0usize..6) {
        prop_assume!(half.iter().sum::<f64>() > 0.1);
        let b = &catalog()[which];
        let g = Grid1D::half_line_cells(0.1, half.len()).unwrap();
        let u0 = DensityField::new(g, half, 0.0).unwrap().normalized().unwrap();
        let traj = solve(&u0, b, &SolveOptions::new(0.1, 0.01).snapshots(&[0.05]).skip_validation(true)).unwrap();
        for s in traj.snapshots.iter().skip(1) {
            prop_assert!(selection_violation(&s.u, &s.eta, b).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn fold_identity_at_histogram_level(seed in any::<u64>(), n in 1usize..400) {
        let s = NoiseStream::new(seed);
        let ys: Vec<f64> = (0..n as u64).map(|i| 1.5 * s.normal(i, 0)).collect();
        let ens = ParticleEnsemble::from_positions(ys, seed, Scheme::WholelineFold);
        let half = Grid1D::half_line(0.1, 3.0).unwrap();
        let whole = estimate_density(&ens, &half.mirror(), Estimator::Histogram, true).unwrap();
        let folded = estimate_density(&fold(&ens), &half, Estimator::Histogram, false).unwrap();
        let m = half.n;
        for k in 0..m {
            prop_assert!((folded.field.values()[k] - 2.0 * whole.field.values()[m + k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn mollifier_keeps_parity_and_integral(c in 0.2f64..1.0, r in 0.3f64..1.0, eps in 0.05f64..0.3, x in 0.0f64..2.0) {
        let phi = make_bump(c, r, false).unwrap();
        let m = mollify_even(&phi, eps).unwrap();
        prop_assert!((m.value(x) - m.value(-x)).abs() <= 1e-12);
        let reach = c + r + eps;
        let total: f64 = integrate(|y| m.value(y), -reach, 0.0, 64) + integrate(|y| m.value(y), 0.0, reach, 64);
        let expect = 2.0 * integrate(|y| phi.value(y), 0.0, c + r, 64);
        prop_assert!((total - expect).abs() <= 1e-12 * expect.max(1.0), "{total} vs {expect}");
    }
}

#[test]
fn classification_is_stable_under_refinement() {
    for b in catalog().into_iter().chain([
        MonotoneGraph::zero(),
        MonotoneGraph::stopped_linear(0.3).unwrap(),
    ]) {
        let coarse = ClassifyOptions::default();
        let fine = ClassifyOptions {
            levels: 2 * coarse.levels,
            ..coarse
        };
        assert_eq!(
            classify_with(&b, coarse),
            classify_with(&b, fine),
            "{}",
            b.label()
        );
    }
}
