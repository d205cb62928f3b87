//! Finite-sample tests and confidence intervals for the jump `τ = p₀₊ − p₀₋`.
//!
//! For nonnegative weights the rejection probability over the whole Lipschitz
//! class is maximized on a one-parameter envelope family, so calibrating a
//! critical value only requires a search over the boundary anchor. Rejection
//! probabilities come either from exhaustive enumeration of all outcome
//! vectors or from Monte Carlo with common random numbers.

mod calibration;
mod ci;
mod envelope;
mod exact;
mod hoeffding;
mod monte_carlo;

use serde::{Deserialize, Serialize};

pub use calibration::{Calibrator, TestCalibration};
pub use ci::{confidence_interval, CiReport};
pub use envelope::{anchor_range, envelope_p_profiles, BernoulliJointProfile};
pub use exact::{rejection_prob_exact, ExactDistribution};
pub use hoeffding::{
    hoeffding_ci, hoeffding_gamma, max_abs_bias, optimized_tail_bound, HoeffdingCi, HoeffdingKind,
};
pub use monte_carlo::{rejection_prob_mc, CrnDraws};

/// Values of the statistic closer than this are treated as equal, and
/// `τ̂ > γ` means `τ̂ > γ + TIE_TOL`.
pub const TIE_TOL: f64 = 1e-12;
/// Largest number of positively weighted observations enumerated exactly.
pub const EXACT_MAX_N: usize = 22;
/// `Method::Auto` enumerates up to this many positively weighted observations.
pub const AUTO_EXACT_MAX: usize = 12;
pub const DEFAULT_INFERENCE_ANCHORS: usize = 201;
pub const DEFAULT_SIMS: usize = 3000;
pub const DEFAULT_BISECTION_STEPS: usize = 20;
/// Critical-value grid spacing for Monte Carlo calibration on large designs.
pub const MC_GRID_STEP: f64 = 1e-3;

/// Which envelope pair is used: `Right` pushes treated means up and control
/// means down (upper tail), `Left` does the opposite (lower tail).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Greater,
    Less,
}

impl Direction {
    pub fn comparison(self) -> Comparison {
        match self {
            Direction::Right => Comparison::Greater,
            Direction::Left => Comparison::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Exact when at most [`AUTO_EXACT_MAX`] observations carry weight.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub method: MethodChoice,
    pub anchor_grid: usize,
    pub n_sims: usize,
    pub seed: u64,
    pub bisection_steps: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            anchor_grid: DEFAULT_INFERENCE_ANCHORS,
            n_sims: DEFAULT_SIMS,
            seed: 0,
            bisection_steps: DEFAULT_BISECTION_STEPS,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> crate::Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(crate::Error::InvalidAlpha(alpha));
    }
    Ok(())
}

pub(crate) fn check_tau0(tau0: f64) -> crate::Result<()> {
    if !(-1.0..=1.0).contains(&tau0) {
        return Err(crate::Error::AnchorOutOfRange {
            value: tau0,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(())
}
