use proptest::prelude::*;
use rdbinary::{
    ate_worst_case_mse_radii, compare_worst_case, gbar, solve_ate_weights_radii,
    solve_gaussian_weights, solve_minimax_weights, AteMode, GbarMode, LipschitzBound,
    SolverOptions, WeightProfile,
};

fn design() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (1usize..=25, 0.1f64..3.0).prop_flat_map(|(n, c)| {
        (
            prop::collection::vec(0.0f64..1.0, n).prop_map(|mut r| {
                r.sort_by(f64::total_cmp);
                r
            }),
            Just(c),
        )
    })
}

#[test]
fn single_boundary_point() {
    // g(w) = max((1−w)²/4, w²/4) is minimized at w = 1/2.
    let r = solve_minimax_weights(
        &[0.0f64],
        LipschitzBound::new(1.0).unwrap(),
        &SolverOptions::default(),
    )
    .unwrap();
    assert!((r.weights.as_slice()[0] - 0.5).abs() < 1e-6);
    assert!((r.value - 1.0 / 16.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn structure_of_minimax_weights((radii, c) in design()) {
        let lip = LipschitzBound::new(c).unwrap();
        let r = solve_minimax_weights(&radii, lip, &SolverOptions::default()).unwrap();
        let w = r.weights.as_slice();
        prop_assert!(w.windows(2).all(|p| p[0] >= p[1] - 1e-8));
        for (wi, ri) in w.iter().zip(&radii) {
            if c * ri >= 0.5 {
                prop_assert_eq!(*wi, 0.0);
            }
        }
        prop_assert!(r.weights.mass() <= 1.0 + 1e-12);
        let certified = gbar(&r.weights, lip, &radii, GbarMode::ClosedForm).unwrap().value;
        prop_assert!((certified - r.value).abs() < 1e-12);
    }

    #[test]
    fn minimax_beats_random_feasible_weights((radii, c) in design(), raw in prop::collection::vec(0.0f64..1.0, 26)) {
        let lip = LipschitzBound::new(c).unwrap();
        let r = solve_minimax_weights(&radii, lip, &SolverOptions::default()).unwrap();
        let n = radii.len();
        let mut w: Vec<f64> = raw[..n].to_vec();
        w.sort_by(|a, b| b.total_cmp(a));
        let s: f64 = w.iter().sum::<f64>() + raw[n];
        let w: Vec<f64> = w.iter().map(|x| x / s.max(1e-12)).collect();
        let other = gbar(&WeightProfile::new(w).unwrap(), lip, &radii, GbarMode::ClosedForm).unwrap().value;
        prop_assert!(r.value <= other + 1e-9);
    }

    #[test]
    fn gaussian_weights_on_simplex((radii, c) in design()) {
        let q = solve_gaussian_weights(&radii, LipschitzBound::new(c).unwrap(), &vec![0.25; radii.len()]).unwrap();
        prop_assert!((q.weights.mass() - 1.0).abs() < 1e-10);
        prop_assert!(q.weights.as_slice().iter().all(|v| *v >= 0.0));
        prop_assert!(q.converged);
    }

    #[test]
    fn ratio_sandwich((radii, c) in design()) {
        let rep = compare_worst_case(&radii, LipschitzBound::new(c).unwrap(), &SolverOptions::default()).unwrap();
        if let (Some(up), Some(cap)) = (rep.ratio_bound, rep.ratio_cap) {
            prop_assert!(rep.ratio >= 1.0 - 1e-9);
            prop_assert!(rep.ratio <= up + 1e-9);
            prop_assert!(up <= cap + 1e-9);
        }
    }

    #[test]
    fn joint_weights_converge_and_certify((rp, c) in design(), (rm, _) in design()) {
        let lip = LipschitzBound::new(c).unwrap();
        let (p, m) = solve_ate_weights_radii(&rp, &rm, lip, &SolverOptions::default()).unwrap();
        prop_assert!(p.converged, "stationarity {}", p.stationarity);
        let v = ate_worst_case_mse_radii(&p.weights, &rp, &m.weights, &rm, lip, AteMode::Exact).unwrap().value;
        prop_assert_eq!(v, p.value);
        prop_assert_eq!(p.value, m.value);
    }
}
