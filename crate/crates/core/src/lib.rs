//! Finite-sample minimax estimation and inference for regression discontinuity
//! designs with binary or bounded outcomes under a Lipschitz smoothness class.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the inference and
//! simulation layers use.

pub mod error;
pub mod gauss;
pub mod inference;
pub mod model;
pub mod projection;
pub mod rng;
pub mod scalar;
pub mod simulation;
pub mod solver;
pub mod worst_case;

pub use error::{Error, Result};
pub use gauss::{compare_grid, compare_worst_case, equally_spaced_radii, ratio_csv, RatioReport};
pub use inference::{
    confidence_interval, envelope_p_profiles, hoeffding_ci, max_abs_bias, rejection_prob_exact,
    rejection_prob_mc, BernoulliJointProfile, Calibrator, CiReport, Comparison, Direction,
    HoeffdingCi, HoeffdingKind, InferenceConfig, Method, MethodChoice, TestCalibration,
};
pub use model::{
    ate_estimate, normalize_design, shrinkage_estimate, Design, LipschitzBound, MeanProfile, Norm,
    Scale, Side, SideSample, WeightProfile,
};
pub use scalar::Real;
pub use solver::{
    solve_ate_weights, solve_ate_weights_radii, solve_gaussian_ate_weights, solve_gaussian_weights,
    solve_minimax_weights, solve_minimax_weights_with_starts, ActiveConstraint, SolveResult,
    SolverOptions,
};
pub use worst_case::{
    ate_worst_case_mse, ate_worst_case_mse_radii, envelope_theta, gbar, mse_binary, mse_gauss,
    worst_case_mse_brute, Anchor, AteMode, GbarMode, WorstCaseMethod, WorstCaseReport,
};

pub type Design64 = Design<f64>;
pub type SideSample64 = SideSample<f64>;
pub type WeightProfile64 = WeightProfile<f64>;
pub type MeanProfile64 = MeanProfile<f64>;
pub type Lipschitz64 = LipschitzBound<f64>;
pub type WorstCaseReport64 = WorstCaseReport<f64>;
pub type SolveResult64 = SolveResult<f64>;
