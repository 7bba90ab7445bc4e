use num_complex::Complex64;
use proptest::prelude::*;

use coverlab_core::correlation::{brute_force_correlation, floquet_correlation};
use coverlab_core::fixtures;
use coverlab_core::floquet::{floquet_inverse, floquet_transform, parseval_pairing, pi_inner, FloquetField, ThetaGrid};
use coverlab_core::jet::TaylorJet;
use coverlab_core::resonance::hessian_check;
use coverlab_core::twisted::{leading_eigen, resonance_surface, twisted_matrix, SurfaceOptions};
use coverlab_core::{build_model, CoverObservable, ModelConfig};

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn floquet_round_trip(seed in 0u64..10_000, states in 1usize..4, d in 1usize..3, radius in 0i64..4, band in 0i64..3) {
        let f = CoverObservable::random(seed, states, d, radius, band, 5);
        let grid = ThetaGrid::new(d, ThetaGrid::exact_size(f.support_radius())).unwrap();
        let field = FloquetField::from_observable(&f, &grid, &f.fiber_modes(), states);
        let back = floquet_inverse(&field, f.support_radius()).unwrap();
        for ((s, n, k), v) in f.entries() {
            prop_assert!((back.get(*s, n, *k) - v).norm() < 1e-12);
        }
        prop_assert!(back.len() <= f.len());
    }

    #[test]
    fn parseval_matches_direct_pairing(seed in 0u64..10_000, states in 1usize..4, d in 1usize..3) {
        let model = fixtures::random_model(states, d, seed, false);
        let f = CoverObservable::random(seed + 1, states, d, 3, 1, 5);
        let g = CoverObservable::random(seed + 2, states, d, 3, 1, 5);
        let grid = ThetaGrid::new(d, ThetaGrid::exact_size(f.support_radius() + g.support_radius())).unwrap();
        let a = parseval_pairing(&f, &g, &grid, model.pi()).unwrap();
        let b = f.pairing(&g, model.pi());
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn real_observables_transform_to_conjugates(seed in 0u64..10_000, theta in -3.0f64..3.0) {
        let mut f = CoverObservable::zero(1);
        for ((s, n, k), v) in CoverObservable::random(seed, 2, 1, 3, 0, 4).entries() {
            f.add(*s, n, *k, Complex64::new(v.re, 0.0));
        }
        let a = floquet_transform(&f, &[theta], 0, 2);
        let b = floquet_transform(&f, &[-theta], 0, 2);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y.conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn projector_is_idempotent(seed in 0u64..10_000, states in 2usize..6, theta in -1.0f64..1.0) {
        let model = fixtures::random_model(states, 1, seed, true);
        let m = twisted_matrix(&model, &[theta], 0);
        let t = leading_eigen(&m, None).unwrap();
        let x: Vec<Complex64> = (0..states).map(|i| Complex64::new(i as f64 - 1.0, 0.3 * i as f64)).collect();
        let once = t.project(&x, model.pi());
        let twice = t.project(&once, model.pi());
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()));
        }
        let mu = m.apply(&t.u);
        for (a, b) in mu.iter().zip(&t.u) {
            prop_assert!((a - t.mu * b).norm() < 1e-10);
        }
    }

    #[test]
    fn correlation_is_sesquilinear(seed in 0u64..10_000, t in 0usize..20) {
        let model = fixtures::random_model(3, 1, seed, false);
        let f1 = CoverObservable::random(seed + 1, 3, 1, 2, 0, 3);
        let f2 = CoverObservable::random(seed + 2, 3, 1, 2, 0, 3);
        let g = CoverObservable::random(seed + 3, 3, 1, 2, 0, 3);
        let c = Complex64::new(0.7, -1.3);
        let lhs = brute_force_correlation(&model, &f1.plus(&f2.scaled(c)), &g, t).unwrap();
        let rhs = brute_force_correlation(&model, &f1, &g, t).unwrap() + c * brute_force_correlation(&model, &f2, &g, t).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn jet_ln_exp_round_trip(a in -0.5f64..0.5, b in -0.5f64..0.5, c in -0.5f64..0.5) {
        let x = TaylorJet::variable(2, 6, 0);
        let y = TaylorJet::variable(2, 6, 1);
        let one = TaylorJet::constant(2, 6, Complex64::new(1.0, 0.0));
        let p = one
            .add(&x.scale(Complex64::new(a, 0.0)))
            .add(&y.scale(Complex64::new(0.0, b)))
            .add(&x.mul(&y).scale(Complex64::new(c, 0.0)));
        prop_assert!(p.ln().exp().max_diff(&p) < 1e-12);
        prop_assert!(p.mul(&x).max_diff(&x.mul(&p)) < 1e-15);
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn brute_and_floquet_agree(seed in 0u64..10_000, states in 1usize..4, d in 1usize..3, t in 0usize..24) {
        let fiber = seed % 2 == 0;
        let model = fixtures::random_model_with_fiber(states, d, seed, false, fiber);
        let band = i64::from(fiber);
        let f = CoverObservable::random(seed + 1, states, d, 2, band, 4);
        let g = CoverObservable::random(seed + 2, states, d, 2, band, 4);
        let a = brute_force_correlation(&model, &f, &g, t).unwrap();
        let b = floquet_correlation(&model, &f, &g, t).unwrap();
        prop_assert!((a - b).norm() < 1e-11, "{a} vs {b}");
    }

    #[test]
    fn fiber_surfaces_are_conjugate_mirrors(seed in 0u64..10_000, states in 1usize..4, k in 1i64..3) {
        let model = fixtures::random_model_with_fiber(states, 1, seed, false, true);
        let grid = ThetaGrid::new(1, 32).unwrap();
        let plus = resonance_surface(&model, &grid, k, SurfaceOptions::default()).unwrap();
        let minus = resonance_surface(&model, &grid, -k, SurfaceOptions::default()).unwrap();
        for idx in 0..grid.node_count() {
            prop_assert!((plus.mu[grid.mirror(idx)] - minus.mu[idx].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn hessian_matches_green_kubo(seed in 0u64..10_000, states in 2usize..6, d in 1usize..3) {
        let model = fixtures::random_model(states, d, seed, true);
        prop_assert!(hessian_check(&model).unwrap() < 1e-6);
    }
}

#[test]
fn model_config_json_round_trip() {
    let config = fixtures::two_state_mixing_fiber().to_config();
    let text = serde_json::to_string(&config).unwrap();
    let back = ModelConfig::from_json(&text).unwrap();
    assert_eq!(back, config);
    let model = build_model(&back).unwrap();
    for (a, b) in model.pi().iter().zip(fixtures::two_state_mixing_fiber().pi()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn pi_inner_is_conjugate_symmetric() {
    let pi = [0.2, 0.3, 0.5];
    let a = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1), Complex64::new(0.0, 1.0)];
    let b = [Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.0), Complex64::new(1.0, 1.0)];
    assert!((pi_inner(&a, &b, &pi) - pi_inner(&b, &a, &pi).conj()).norm() < 1e-15);
}
