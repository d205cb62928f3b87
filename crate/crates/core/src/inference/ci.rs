use serde::{Deserialize, Serialize};

use super::{check_alpha, Calibrator, InferenceConfig, Method};
use crate::error::Result;
use crate::model::{ate_estimate, Design, LipschitzBound, WeightProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub lower: f64,
    pub upper: f64,
    pub tau_hat: f64,
    pub alpha: f64,
    pub method: Method,
}

impl CiReport {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, tau: f64) -> bool {
        self.lower <= tau && tau <= self.upper
    }
}

impl Calibrator {
    /// Two-sided test-inversion interval for the observed statistic `tau_hat`.
    ///
    /// The lower end is the boundary of `{τ₀ : τ̂ ≤ γ_r*(τ₀)}` and the upper end
    /// that of `{τ₀ : γ_l*(τ₀) ≤ τ̂}`, each located by halving steps from 0.
    pub fn interval(&self, tau_hat: f64, alpha: f64) -> Result<CiReport> {
        check_alpha(alpha)?;
        let steps = self.config().bisection_steps;
        let lower = if !self.rejects_right(-1.0, tau_hat, alpha)? {
            -1.0
        } else {
            let mut t = 0.0;
            let mut best = 1.0f64;
            for k in 0..steps {
                let h = 0.5f64.powi(k as i32 + 1);
                if self.rejects_right(t, tau_hat, alpha)? {
                    t += h;
                } else {
                    best = best.min(t);
                    t -= h;
                }
            }
            if !self.rejects_right(t, tau_hat, alpha)? {
                best = best.min(t);
            }
            best
        };
        let upper = if !self.rejects_left(1.0, tau_hat, alpha)? {
            1.0
        } else {
            let mut t = 0.0;
            let mut best = -1.0f64;
            for k in 0..steps {
                let h = 0.5f64.powi(k as i32 + 1);
                if self.rejects_left(t, tau_hat, alpha)? {
                    t -= h;
                } else {
                    best = best.max(t);
                    t += h;
                }
            }
            if !self.rejects_left(t, tau_hat, alpha)? {
                best = best.max(t);
            }
            best
        };
        let (lower, upper) = if lower <= upper {
            (lower, upper)
        } else {
            (upper, lower)
        };
        Ok(CiReport {
            lower,
            upper,
            tau_hat,
            alpha,
            method: self.method(),
        })
    }
}

/// Interval for the jump at the cutoff from the outcomes stored in `design`.
pub fn confidence_interval(
    design: &Design<f64>,
    w_plus: &WeightProfile<f64>,
    w_minus: &WeightProfile<f64>,
    c: LipschitzBound<f64>,
    alpha: f64,
    config: InferenceConfig,
) -> Result<CiReport> {
    let tau_hat = ate_estimate(design, w_plus, w_minus)?;
    Calibrator::new(design, w_plus, w_minus, c, config)?.interval(tau_hat, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SideSample;

    #[test]
    fn zero_weights_give_full_range() {
        let d = Design::new(
            SideSample::new(vec![0.1, 0.2], vec![1.0, 0.0]).unwrap(),
            SideSample::new(vec![0.1], vec![1.0]).unwrap(),
            0.0,
        );
        let ci = confidence_interval(
            &d,
            &WeightProfile::zeros(2),
            &WeightProfile::zeros(1),
            LipschitzBound::new(1.0).unwrap(),
            0.05,
            InferenceConfig::default(),
        )
        .unwrap();
        assert_eq!((ci.lower, ci.upper), (-1.0, 1.0));
    }

    #[test]
    fn interval_brackets_retained_points() {
        let d = Design::new(
            SideSample::new(vec![0.0, 0.1, 0.2], vec![1.0, 1.0, 0.0]).unwrap(),
            SideSample::new(vec![0.05, 0.15], vec![0.0, 1.0]).unwrap(),
            0.0,
        );
        let wp = WeightProfile::new(vec![0.4, 0.3, 0.2]).unwrap();
        let wm = WeightProfile::new(vec![0.5, 0.3]).unwrap();
        let c = LipschitzBound::new(1.0).unwrap();
        let cfg = InferenceConfig::default();
        let ci = confidence_interval(&d, &wp, &wm, c, 0.1, cfg).unwrap();
        let cal = Calibrator::new(&d, &wp, &wm, c, cfg).unwrap();
        assert!(ci.lower <= ci.upper);
        for i in 0..=40 {
            let t = -1.0 + i as f64 * 0.05;
            if !cal.rejects(t, ci.tau_hat, 0.1).unwrap() {
                assert!(
                    t >= ci.lower - 1e-6 && t <= ci.upper + 1e-6,
                    "{t} outside {ci:?}"
                );
            }
        }
    }
}
