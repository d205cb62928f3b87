use rdbinary::simulation::*;
use rdbinary::{ate_estimate, Design, HoeffdingKind, LipschitzBound, SolverOptions};

fn small_spec(dgp: DgpSpec, n: usize, c: f64) -> StudySpec {
    let mut spec = StudySpec::new(dgp, n, c);
    spec.replications = 400;
    spec.ci_replications = 20;
    spec.inference.n_sims = 500;
    spec.inference.anchor_grid = 51;
    spec.seed = 11;
    spec
}

#[test]
fn reused_weights_match_per_replication_fits() {
    let design = equally_spaced_design(20).unwrap();
    let c = LipschitzBound::new(0.5).unwrap();
    let once = fit_estimator(
        EstimatorKind::Rdbinary,
        &design,
        c,
        &SolverOptions::default(),
    )
    .unwrap();
    let dgp = DgpSpec::WorstCaseEnvelope { c: 0.5 };
    let mp: Vec<f64> = design
        .treated
        .radii()
        .iter()
        .map(|r| dgp_mean(&dgp, *r, rdbinary::Side::Treated))
        .collect();
    let mm: Vec<f64> = design
        .control
        .radii()
        .iter()
        .map(|r| dgp_mean(&dgp, -*r, rdbinary::Side::Control))
        .collect();
    for rep in 0..5 {
        let (yp, ym) = draw_binary_outcomes(&mp, &mm, 3, rep);
        let d = Design::new(
            design.treated.with_outcomes(yp).unwrap(),
            design.control.with_outcomes(ym).unwrap(),
            0.0,
        );
        let fresh =
            fit_estimator(EstimatorKind::Rdbinary, &d, c, &SolverOptions::default()).unwrap();
        let a = ate_estimate(&d, &once.w_plus, &once.w_minus).unwrap();
        let b = ate_estimate(&d, &fresh.w_plus, &fresh.w_minus).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn study_is_identical_across_thread_counts() {
    let spec = small_spec(DgpSpec::flat(), 16, 0.5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_mc_study(&spec).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a, b);
}

#[test]
fn flat_design_estimators_are_unbiased() {
    let spec = small_spec(DgpSpec::flat(), 30, 0.5);
    let report = run_mc_study(&spec).unwrap();
    assert_eq!(report.true_tau, 0.0);
    for s in &report.summaries {
        assert!(s.bias.value.abs() <= 3.0 * s.bias.se + 1e-12, "{:?}", s);
        assert!(s.root_mse.value > 0.0);
    }
}

#[test]
fn local_mean_weights_average_each_side() {
    let design = equally_spaced_design(40).unwrap();
    for c in [0.1, 1.0, 5.0] {
        let f = fit_estimator(
            EstimatorKind::LocalMean,
            &design,
            LipschitzBound::new(c).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((f.w_plus.mass() - 1.0).abs() < 1e-12);
        assert!((f.w_minus.mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn minimax_beats_baselines_on_worst_case_design() {
    let spec = small_spec(DgpSpec::WorstCaseEnvelope { c: 1.0 }, 50, 1.0);
    let report = run_mc_study(&spec).unwrap();
    let rmse = |k| report.summary(k).unwrap().root_mse.value;
    assert!(rmse(EstimatorKind::Rdbinary) < rmse(EstimatorKind::LocalMean));
}

#[test]
fn hoeffding_interval_covers() {
    let spec = BoundedCoverageSpec {
        dgp: DgpSpec::WorstCaseEnvelope { c: 0.5 },
        n: 30,
        c_used: 0.5,
        alpha: 0.1,
        kind: HoeffdingKind::TwoOptimized,
        concentration: 4.0,
        replications: 300,
        seed: 5,
    };
    let cov = hoeffding_coverage(&spec).unwrap();
    assert!(cov.value >= 0.9 - 3.0 * cov.se, "{cov:?}");
    assert_eq!(cov, hoeffding_coverage(&spec).unwrap());
}

#[test]
fn study_rejects_bad_settings() {
    let mut spec = small_spec(DgpSpec::flat(), 10, 0.5);
    spec.ci_replications = spec.replications + 1;
    assert!(run_mc_study(&spec).is_err());
    spec.ci_replications = 0;
    spec.estimators.clear();
    assert!(run_mc_study(&spec).is_err());
}
