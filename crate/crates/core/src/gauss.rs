//! Binary-minimax versus Gaussian-model weights, compared under the binary
//! worst case.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LipschitzBound, WeightProfile};
use crate::projection::project_monotone_capped;
use crate::scalar::{ordered_sum, Real};
use crate::solver::{solve_gaussian_weights, solve_minimax_weights_with_starts, SolverOptions};
use crate::worst_case::{gbar, GbarMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport<T = f64> {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: T,
    /// `ḡ(ŵ)` for the binary minimax weights.
    pub value_binary: T,
    /// `ḡ(w̃)` for the Gaussian-model weights.
    pub value_gauss_under_binary: T,
    /// MSE ratio `ḡ(w̃) / ḡ(ŵ)`.
    pub ratio: T,
    pub ratio_root_mse: T,
    /// Shrinkage mass `û` of the binary weights.
    pub u_hat: T,
    /// `û⁻²(1 + C²Σŵ²‖R‖² / (¼Σŵ²))`; `None` when `û = 0`.
    pub ratio_bound: Option<T>,
    /// `2û⁻²`; `None` when `û = 0`.
    pub ratio_cap: Option<T>,
    pub weights_binary: WeightProfile<T>,
    pub weights_gauss: WeightProfile<T>,
}

impl<T: Real> RatioReport<T> {
    pub fn u_hat_is_zero(&self) -> bool {
        self.u_hat == T::zero()
    }
}

/// Solves both weight problems on `radii` and evaluates them under the binary model.
pub fn compare_worst_case<T: Real>(
    radii: &[T],
    c: LipschitzBound<T>,
    opts: &SolverOptions,
) -> Result<RatioReport<T>> {
    let n = radii.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let gauss = solve_gaussian_weights(radii, c, &vec![T::quarter(); n])?;
    let seed = project_monotone_capped(gauss.weights.as_slice(), T::one());
    let binary = solve_minimax_weights_with_starts(radii, c, opts, &[seed])?;
    let value_gauss = gbar(&gauss.weights, c, radii, GbarMode::ClosedForm)?.value;
    let value_binary = binary.value;
    let ratio = value_gauss / value_binary;

    let w = binary.weights.as_slice();
    let u_hat = binary.weights.mass();
    let (ratio_bound, ratio_cap) = if u_hat > T::zero() {
        let c2 = c.value() * c.value();
        let s2 = ordered_sum(w.iter().map(|x| *x * *x));
        let s2r2 = ordered_sum(w.iter().zip(radii).map(|(x, r)| *x * *x * *r * *r));
        let inv = T::one() / (u_hat * u_hat);
        (
            Some(inv * (T::one() + c2 * s2r2 / (T::quarter() * s2))),
            Some(T::lit(2.0) * inv),
        )
    } else {
        (None, None)
    };
    Ok(RatioReport {
        n,
        c: c.value(),
        value_binary,
        value_gauss_under_binary: value_gauss,
        ratio,
        ratio_root_mse: ratio.sqrt(),
        u_hat,
        ratio_bound,
        ratio_cap,
        weights_binary: binary.weights,
        weights_gauss: gauss.weights,
    })
}

/// Radii `i / n` for `i = 1..=n`.
pub fn equally_spaced_radii(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// Reports on equally spaced designs for every `(n, C)` pair, in row-major order.
pub fn compare_grid(
    ns: &[usize],
    cs: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<RatioReport<f64>>> {
    let jobs: Vec<(usize, f64)> = ns
        .iter()
        .flat_map(|n| cs.iter().map(move |c| (*n, *c)))
        .collect();
    jobs.par_iter()
        .map(|(n, c)| compare_worst_case(&equally_spaced_radii(*n), LipschitzBound::new(*c)?, opts))
        .collect()
}

/// CSV with columns `n,C,ratio_root_mse,ratio_mse,ratio_bound`.
pub fn ratio_csv(reports: &[RatioReport<f64>]) -> String {
    let mut out = String::from("n,C,ratio_root_mse,ratio_mse,ratio_bound\n");
    for r in reports {
        let upper = r
            .ratio_bound
            .map(|v| v.to_string())
            .unwrap_or_else(|| "NA".into());
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n, r.c, r.ratio_root_mse, r.ratio, upper
        );
    }
    out
}
