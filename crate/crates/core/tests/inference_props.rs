use proptest::prelude::*;
use rdbinary::inference::{
    hoeffding_gamma, optimized_tail_bound, Calibrator, Comparison, Direction, HoeffdingKind,
    InferenceConfig, MethodChoice, TIE_TOL,
};
use rdbinary::model::Scale;
use rdbinary::{
    envelope_p_profiles, rejection_prob_exact, rejection_prob_mc, BernoulliJointProfile, Design,
    LipschitzBound, MeanProfile, SideSample, WeightProfile,
};

/// Independent oracle: loops over all outcome vectors and sums the Bernoulli product.
fn oracle_tail(wp: &[f64], wm: &[f64], qp: &[f64], qm: &[f64], gamma: f64, greater: bool) -> f64 {
    let n = wp.len() + wm.len();
    let mut total = 0.0;
    for mask in 0..(1u32 << n) {
        let mut prob = 1.0;
        let mut stat = 0.0;
        for i in 0..n {
            let y = ((mask >> i) & 1) as f64;
            let (w, q, sign) = if i < wp.len() {
                (wp[i], qp[i], 1.0)
            } else {
                (wm[i - wp.len()], qm[i - wp.len()], -1.0)
            };
            prob *= if y == 1.0 { q } else { 1.0 - q };
            stat += sign * w * (y - 0.5);
        }
        let hit = if greater {
            stat > gamma + TIE_TOL
        } else {
            stat < gamma - TIE_TOL
        };
        if hit {
            total += prob;
        }
    }
    total
}

fn profile(qp: &[f64], qm: &[f64]) -> BernoulliJointProfile {
    let mut p = vec![0.5];
    p.extend_from_slice(qp);
    let mut m = vec![0.5];
    m.extend_from_slice(qm);
    BernoulliJointProfile::new(
        MeanProfile::new(p, Scale::Probability).unwrap(),
        MeanProfile::new(m, Scale::Probability).unwrap(),
    )
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(np, nm)| {
        (
            prop::collection::vec(0.0f64..0.6, np),
            prop::collection::vec(0.0f64..0.6, nm),
            prop::collection::vec(0.0f64..1.0, np),
            prop::collection::vec(0.0f64..1.0, nm),
            0.0f64..2.0,
        )
    })
}

fn calibrator(
    rp: &[f64],
    rm: &[f64],
    wp: &[f64],
    wm: &[f64],
    c: f64,
    method: MethodChoice,
) -> Calibrator {
    let cfg = InferenceConfig {
        method,
        anchor_grid: 41,
        n_sims: 2000,
        ..InferenceConfig::default()
    };
    Calibrator::from_radii(
        rp,
        rm,
        &WeightProfile::new(wp.to_vec()).unwrap(),
        &WeightProfile::new(wm.to_vec()).unwrap(),
        LipschitzBound::new(c).unwrap(),
        cfg,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_oracle((wp, wm, qp, qm, _) in instance(), gamma in -1.0f64..1.0) {
        let pr = profile(&qp, &qm);
        let a = WeightProfile::new(wp.clone()).unwrap();
        let b = WeightProfile::new(wm.clone()).unwrap();
        for (cmp, greater) in [(Comparison::Greater, true), (Comparison::Less, false)] {
            let got = rejection_prob_exact(&a, &b, &pr, gamma, cmp).unwrap();
            let want = oracle_tail(&wp, &wm, &qp, &qm, gamma, greater);
            prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn raising_treated_or_lowering_control_dominates(
        (wp, wm, qp, qm, _) in instance(), gamma in -1.0f64..1.0, bump in 0.0f64..1.0, pick in 0usize..6
    ) {
        let a = WeightProfile::new(wp.clone()).unwrap();
        let b = WeightProfile::new(wm.clone()).unwrap();
        let base = rejection_prob_exact(&a, &b, &profile(&qp, &qm), gamma, Comparison::Greater).unwrap();
        let (mut qp2, mut qm2) = (qp.clone(), qm.clone());
        if pick % 2 == 0 {
            let i = (pick / 2) % qp2.len();
            qp2[i] += bump * (1.0 - qp2[i]);
        } else {
            let i = (pick / 2) % qm2.len();
            qm2[i] *= 1.0 - bump;
        }
        let moved = rejection_prob_exact(&a, &b, &profile(&qp2, &qm2), gamma, Comparison::Greater).unwrap();
        prop_assert!(moved >= base - 1e-12);
    }

    #[test]
    fn worst_rejection_is_nonincreasing_in_gamma((rp, rm, wp, wm, c) in instance(), g in -1.0f64..1.0, dg in 0.0f64..0.5, tau0 in -1.0f64..1.0) {
        let rp = sorted(rp);
        let rm = sorted(rm);
        for method in [MethodChoice::Exact, MethodChoice::MonteCarlo] {
            let cal = calibrator(&rp, &rm, &wp, &wm, c, method);
            let lo = cal.worst_rejection(tau0, g, Direction::Right).unwrap();
            let hi = cal.worst_rejection(tau0, g + dg, Direction::Right).unwrap();
            prop_assert!(hi <= lo);
            let lo_l = cal.worst_rejection(tau0, g, Direction::Left).unwrap();
            let hi_l = cal.worst_rejection(tau0, g + dg, Direction::Left).unwrap();
            prop_assert!(lo_l <= hi_l);
        }
    }

    #[test]
    fn critical_values_increase_with_tau0((rp, rm, wp, wm, c) in instance(), alpha in 0.02f64..0.5) {
        let rp = sorted(rp);
        let rm = sorted(rm);
        for method in [MethodChoice::Exact, MethodChoice::MonteCarlo] {
            let cal = calibrator(&rp, &rm, &wp, &wm, c, method);
            let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for i in 0..=20 {
                let t = -1.0 + 0.1 * i as f64;
                let r = cal.critical_value(t, alpha, Direction::Right).unwrap();
                let l = cal.critical_value(t, alpha, Direction::Left).unwrap();
                prop_assert!(r >= prev.0 && l >= prev.1, "{method:?} at {t}: {r} {l} after {prev:?}");
                prev = (r, l);
            }
        }
    }
}

#[test]
fn envelope_rejection_dominates_profiles_in_band() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let (rp, rm) = ([0.1, 0.3], [0.05, 0.2]);
    let c = LipschitzBound::new(1.0).unwrap();
    let d = Design::new(
        SideSample::from_radii(rp.to_vec()).unwrap(),
        SideSample::from_radii(rm.to_vec()).unwrap(),
        0.0,
    );
    let wp = WeightProfile::new(vec![0.4, 0.2]).unwrap();
    let wm = WeightProfile::new(vec![0.5, 0.3]).unwrap();
    let cal = Calibrator::new(
        &d,
        &wp,
        &wm,
        c,
        InferenceConfig {
            anchor_grid: 401,
            ..Default::default()
        },
    )
    .unwrap();
    for _ in 0..200 {
        let tau0: f64 = rng.random_range(-0.9..0.9);
        let gamma: f64 = rng.random_range(-0.5..0.5);
        let (lo, hi) = rdbinary::inference::anchor_range(tau0);
        let p0: f64 = rng.random_range(lo..=hi);
        let q0 = (p0 - tau0).clamp(0.0, 1.0);
        // Means anywhere between the lower and upper envelopes.
        let qp: Vec<f64> = rp
            .iter()
            .map(|r| (p0 + rng.random_range(-1.0..1.0) * r).clamp(0.0, 1.0))
            .collect();
        let qm: Vec<f64> = rm
            .iter()
            .map(|r| (q0 + rng.random_range(-1.0..1.0) * r).clamp(0.0, 1.0))
            .collect();
        let p = oracle_tail(wp.as_slice(), wm.as_slice(), &qp, &qm, gamma, true);
        let worst = cal.worst_rejection(tau0, gamma, Direction::Right).unwrap();
        // The continuum maximum can exceed the grid maximum by the grid resolution only.
        let env = envelope_p_profiles(p0, tau0, c, &d, Direction::Right).unwrap();
        let at_anchor = rejection_prob_exact(&wp, &wm, &env, gamma, Comparison::Greater).unwrap();
        assert!(at_anchor >= p - 1e-12);
        assert!(worst >= p - 0.02, "{worst} < {p}");
    }
}

#[test]
fn monte_carlo_within_three_standard_errors() {
    let wp = WeightProfile::new(vec![0.3, 0.2]).unwrap();
    let wm = WeightProfile::new(vec![0.35, 0.1]).unwrap();
    let pr = profile(&[0.7, 0.4], &[0.2, 0.55]);
    for gamma in [-0.2, 0.0, 0.1, 0.25] {
        let exact = rejection_prob_exact(&wp, &wm, &pr, gamma, Comparison::Greater).unwrap();
        let mc = rejection_prob_mc(&wp, &wm, &pr, gamma, Comparison::Greater, 100_000, 3).unwrap();
        let se = (exact * (1.0 - exact) / 100_000.0).sqrt();
        assert!((mc - exact).abs() <= 3.0 * se + 1e-12, "{mc} vs {exact}");
    }
}

/// Exact coverage under a fixed truth, by enumerating every outcome vector.
#[test]
fn exact_coverage_of_two_sided_interval() {
    let (rp, rm) = (vec![0.0, 0.2, 0.4], vec![0.1, 0.3]);
    let c = 1.0;
    let d = Design::new(
        SideSample::from_radii(rp.clone()).unwrap(),
        SideSample::from_radii(rm.clone()).unwrap(),
        0.0,
    );
    let wp = WeightProfile::new(vec![0.35, 0.25, 0.1]).unwrap();
    let wm = WeightProfile::new(vec![0.4, 0.2]).unwrap();
    let alpha = 0.1;
    let cal = Calibrator::new(
        &d,
        &wp,
        &wm,
        LipschitzBound::new(c).unwrap(),
        InferenceConfig::default(),
    )
    .unwrap();
    for (p0p, p0m, slope_p, slope_m) in [
        (0.6, 0.4, 0.5, -0.8),
        (0.9, 0.2, -1.0, 1.0),
        (0.5, 0.5, 0.0, 0.0),
    ] {
        let qp: Vec<f64> = rp
            .iter()
            .map(|r| (p0p + slope_p * r).clamp(0.0, 1.0))
            .collect();
        let qm: Vec<f64> = rm
            .iter()
            .map(|r| (p0m + slope_m * r).clamp(0.0, 1.0))
            .collect();
        let tau = p0p - p0m;
        let n = rp.len() + rm.len();
        let mut cover = 0.0;
        for mask in 0..(1u32 << n) {
            let y: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
            let mut prob = 1.0;
            for i in 0..n {
                let q = if i < rp.len() {
                    qp[i]
                } else {
                    qm[i - rp.len()]
                };
                prob *= if y[i] == 1.0 { q } else { 1.0 - q };
            }
            let tau_hat: f64 = wp
                .as_slice()
                .iter()
                .zip(&y[..rp.len()])
                .map(|(w, y)| w * (y - 0.5))
                .sum::<f64>()
                - wm.as_slice()
                    .iter()
                    .zip(&y[rp.len()..])
                    .map(|(w, y)| w * (y - 0.5))
                    .sum::<f64>();
            let ci = cal.interval(tau_hat, alpha).unwrap();
            if ci.contains(tau) {
                cover += prob;
            }
        }
        assert!(
            cover >= 1.0 - alpha - 1e-12,
            "coverage {cover} at tau {tau}"
        );
    }
}

#[test]
fn retained_set_is_an_interval() {
    let d = Design::new(
        SideSample::new(vec![0.05, 0.15, 0.3], vec![1.0, 0.0, 1.0]).unwrap(),
        SideSample::new(vec![0.1, 0.25], vec![0.0, 0.0]).unwrap(),
        0.0,
    );
    let wp = WeightProfile::new(vec![0.3, 0.25, 0.15]).unwrap();
    let wm = WeightProfile::new(vec![0.4, 0.2]).unwrap();
    let cal = Calibrator::new(
        &d,
        &wp,
        &wm,
        LipschitzBound::new(0.8).unwrap(),
        InferenceConfig::default(),
    )
    .unwrap();
    for tau_hat in [-0.4, -0.1, 0.0, 0.2, 0.45] {
        let kept: Vec<bool> = (0..=40)
            .map(|i| !cal.rejects(-1.0 + 0.05 * i as f64, tau_hat, 0.05).unwrap())
            .collect();
        let first = kept.iter().position(|k| *k);
        let last = kept.iter().rposition(|k| *k);
        if let (Some(a), Some(b)) = (first, last) {
            assert!(
                kept[a..=b].iter().all(|k| *k),
                "gap in retained set at tau_hat {tau_hat}"
            );
        }
        let ci = cal.interval(tau_hat, 0.05).unwrap();
        assert!(ci.lower <= ci.upper && ci.lower >= -1.0 && ci.upper <= 1.0);
    }
}

#[test]
fn hoeffding_optimized_below_naive() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let bias: f64 = rng.random_range(0.001..0.5);
        let s: f64 = rng.random_range(0.001..1.0);
        let alpha: f64 = rng.random_range(0.01..0.3);
        let naive = hoeffding_gamma(bias, s, alpha, HoeffdingKind::TwoNaive).unwrap();
        let opt = hoeffding_gamma(bias, s, alpha, HoeffdingKind::TwoOptimized).unwrap();
        assert!(opt < naive && opt > bias);
        assert!(optimized_tail_bound(opt, bias, s) <= alpha + 1e-12);
    }
}
