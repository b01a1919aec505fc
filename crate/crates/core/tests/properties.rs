//! Property tests over the public API: construction/decision round
//! trips, gauge and permutation invariance, completion identities,
//! triangle geometry, tangent recovery, and ensemble statistics.

use proptest::prelude::*;
use unisto_core::{
    build_ckm3, canonical_gauge_form, check_doubly_stochastic, chi2_unitarity_condition,
    convex_combine, cos_delta_from_quadruple, enumerate_independent_quadruples, hadamard_square,
    mean_moduli, omega_tangents, reconstruct_unitary, recover_cij_from_tangents, residuals4,
    sides_on, solve4, test_unistochastic, triangle_geometry, unitarity_defect, GaugeTransform,
    MixingParameters3, ModuliEnsemble, OrthogonalityId, Params4Free, Solve4Config,
    SquaredModuliMatrix,
};

/// Mixing parameters away from the degenerate edges, where every
/// quantity below is well defined.
fn params_strategy() -> impl Strategy<Value = MixingParameters3> {
    (
        0.15f64..1.35,
        0.15f64..1.35,
        0.15f64..1.35,
        0.15f64..3.0,
    )
        .prop_map(|(theta12, theta13, theta23, delta)| MixingParameters3 {
            theta12,
            theta13,
            theta23,
            delta,
        })
}

fn max_entry_gap(a: &SquaredModuliMatrix, b: &SquaredModuliMatrix) -> f64 {
    a.entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn built_matrices_are_unistochastic_and_round_trip(p in params_strategy()) {
        let u = build_ckm3(&p);
        prop_assert!(unitarity_defect(&u) < 1e-12);
        let m = hadamard_square(&u);
        let report = check_doubly_stochastic(&m, 1e-9).unwrap();
        prop_assert!(report.pass);
        let verdict = test_unistochastic(&m, 1e-9).unwrap();
        prop_assert!(verdict.physical);
        let cos_delta = verdict.cos_delta().unwrap();
        prop_assert!((cos_delta - p.delta.cos()).abs() < 1e-8);
        let rebuilt = reconstruct_unitary(&m).unwrap();
        prop_assert!(max_entry_gap(&hadamard_square(&rebuilt), &m) < 1e-9);
    }

    #[test]
    fn rephasing_leaves_the_moduli_unchanged(
        p in params_strategy(),
        phases in proptest::array::uniform6(0.0f64..6.28),
    ) {
        let u = build_ckm3(&p);
        let g = GaugeTransform {
            left_phases: phases[..3].to_vec(),
            right_phases: phases[3..].to_vec(),
            ..GaugeTransform::identity(3)
        };
        let m1 = hadamard_square(&u);
        let m2 = hadamard_square(&g.apply(&u));
        prop_assert!(max_entry_gap(&m1, &m2) < 1e-14);
    }

    #[test]
    fn canonical_gauge_form_round_trips(
        p in params_strategy(),
        phases in proptest::array::uniform6(0.0f64..6.28),
    ) {
        let u = build_ckm3(&p);
        let g = GaugeTransform {
            left_phases: phases[..3].to_vec(),
            right_phases: phases[3..].to_vec(),
            ..GaugeTransform::identity(3)
        };
        let scrambled = g.apply(&u);
        let (canonical, transform) = canonical_gauge_form(&scrambled);
        // first row and column real nonnegative
        for k in 0..3 {
            prop_assert!(canonical.get(0, k).im.abs() < 1e-12);
            prop_assert!(canonical.get(0, k).re >= -1e-12);
            prop_assert!(canonical.get(k, 0).im.abs() < 1e-12);
            prop_assert!(canonical.get(k, 0).re >= -1e-12);
        }
        let back = transform.apply(&canonical);
        let gap = back
            .entries()
            .iter()
            .zip(scrambled.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        prop_assert!(gap < 1e-12);
    }

    #[test]
    fn completions_of_unistochastic_matrices_agree(
        p in params_strategy(),
        index in 0usize..81,
    ) {
        let m = hadamard_square(&build_ckm3(&p));
        let q = enumerate_independent_quadruples()[index];
        let result = cos_delta_from_quadruple(&m, &q).unwrap();
        prop_assert!(!result.completed.out_of_polytope);
        prop_assert!(max_entry_gap(&result.completed.matrix, &m) < 1e-9);
        // the four corner relations coincide on the completion
        prop_assert_eq!(result.candidates.len(), 1);
    }

    #[test]
    fn all_six_triangles_close_with_angle_sum_pi(p in params_strategy()) {
        let m = hadamard_square(&build_ckm3(&p));
        let q = enumerate_independent_quadruples()[0];
        for id in OrthogonalityId::ALL {
            let geo = triangle_geometry(&m, id, &q).unwrap();
            prop_assert!(geo.valid, "{:?}: {:?}", id, geo.diagnostics);
            let (a1, a2, a3) = geo.vertex_angles.unwrap();
            prop_assert!((a1 + a2 + a3 - core::f64::consts::PI).abs() < 1e-9);
            let (rho, eta) = geo.apex.unwrap();
            // apex distance checks against both side lengths
            let rc = geo.sides.0.real().unwrap();
            let rt = geo.sides.1.real().unwrap();
            prop_assert!((rho.hypot(eta) - rc).abs() < 1e-9);
            prop_assert!(((rho - 1.0).hypot(eta) - rt).abs() < 1e-9);
        }
    }

    #[test]
    fn tangent_recovery_round_trips(p in params_strategy()) {
        let tangents = match omega_tangents(&p) {
            Ok(t) => t,
            Err(_) => return Ok(()), // right angle: tangent undefined
        };
        let sq = recover_cij_from_tangents(&tangents).unwrap();
        prop_assert!(sq.valid);
        let (c12, c13, c23) = p.cosines();
        prop_assert!((sq.c12_sq - c12 * c12).abs() < 1e-6);
        prop_assert!((sq.c13_sq - c13 * c13).abs() < 1e-6);
        prop_assert!((sq.c23_sq - c23 * c23).abs() < 1e-6);
    }

    #[test]
    fn unitarity_chi2_vanishes_exactly_on_built_matrices(p in params_strategy()) {
        let m = hadamard_square(&build_ckm3(&p));
        prop_assert!(chi2_unitarity_condition(&m) < 1e-18);
    }

    #[test]
    fn mean_square_matches_uniform_convex_combination(
        p1 in params_strategy(),
        p2 in params_strategy(),
    ) {
        let e = ModuliEnsemble::new(vec![build_ckm3(&p1), build_ckm3(&p2)]).unwrap();
        let mean = mean_moduli(&e).unwrap();
        let combined = convex_combine(&e).unwrap();
        for (mu, c) in mean.entries().iter().zip(combined.entries()) {
            prop_assert!((mu * mu - c).abs() < 1e-14);
        }
        let report = check_doubly_stochastic(&combined, 1e-12).unwrap();
        prop_assert!(report.pass);
    }

    #[test]
    fn physicality_is_permutation_invariant(
        p in params_strategy(),
        rp in Just([2usize, 0, 1]),
        cp in Just([1usize, 2, 0]),
    ) {
        let m = hadamard_square(&build_ckm3(&p));
        let permuted = m.permuted(&rp, &cp);
        let v = test_unistochastic(&permuted, 1e-9).unwrap();
        prop_assert!(v.physical);
        let rebuilt = reconstruct_unitary(&permuted).unwrap();
        prop_assert!(max_entry_gap(&hadamard_square(&rebuilt), &permuted) < 1e-9);
    }
}

proptest! {
    // the n=4 solver is much heavier; keep the case count small
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn n4_residuals_vanish_at_the_truth_and_the_solver_finds_it(
        angles in proptest::array::uniform5(0.3f64..1.2),
        free in proptest::array::uniform4(0.4f64..2.7),
    ) {
        use unisto_core::{build_unitary_n, GeneratingVectorsN};
        let [a1, a2, a3, b1, c1] = angles;
        let truth = Params4Free {
            b2: free[0].min(1.5),
            beta1: free[1],
            beta2: free[2],
            gamma1: free[3],
        };
        let u = build_unitary_n(&GeneratingVectorsN::standard4(
            a1, a2, a3, b1, truth.b2, c1, truth.beta1, truth.beta2, truth.gamma1,
        ));
        prop_assert!(unitarity_defect(&u) < 1e-12);
        let m = hadamard_square(&u);
        let r = residuals4(&m, &truth);
        prop_assert!(r.iter().all(|v| v.abs() < 1e-10), "{r:?}");
        let cfg = Solve4Config {
            b2_starts: 3,
            phase_starts: 4,
            ..Solve4Config::default()
        };
        let outcome = solve4(&m, &cfg);
        prop_assert!(!outcome.solutions.is_empty(), "{:?}", outcome.diagnostics);
        let best = &outcome.solutions[0];
        prop_assert!(best.residual_norm < 1e-8);
        // the found parameters reproduce the moduli (solutions are only
        // unique modulo conjugation, so compare through the residuals)
        let r2 = residuals4(&m, &best.params);
        prop_assert!(r2.iter().all(|v| v.abs() < 1e-8));
    }
}

#[test]
fn first_line4_matches_an_exact_uniform_matrix() {
    let entries = vec![0.25f64; 16];
    let m = SquaredModuliMatrix::new(4, entries, 1e-12).unwrap();
    let fl = unisto_core::first_line_params4(&m);
    assert!(fl.all_valid());
    assert!((fl.a1.cos - 0.5).abs() < 1e-14);
    assert!((fl.b1.cos - 1.0 / 3.0f64.sqrt()).abs() < 1e-14);
    assert!((fl.c1.cos - 1.0 / 2.0f64.sqrt()).abs() < 1e-14);
}

#[test]
fn sides_and_quadruple_choice_are_independent() {
    // on a unistochastic matrix every independent quadruple completes to
    // the same matrix, so the triangle sides cannot depend on the choice
    let p = MixingParameters3 {
        theta12: 0.7,
        theta13: 0.4,
        theta23: 1.0,
        delta: 1.3,
    };
    let m = hadamard_square(&build_ckm3(&p));
    let reference: Vec<_> = OrthogonalityId::ALL
        .iter()
        .map(|&id| sides_on(&m, id))
        .collect();
    for q in enumerate_independent_quadruples().iter().step_by(7) {
        for (k, &id) in OrthogonalityId::ALL.iter().enumerate() {
            let geo = triangle_geometry(&m, id, q).unwrap();
            assert!(geo.sides.0.approx_eq(&reference[k].0, 1e-8));
            assert!(geo.sides.1.approx_eq(&reference[k].1, 1e-8));
        }
    }
}
