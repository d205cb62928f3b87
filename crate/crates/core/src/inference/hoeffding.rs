//! Concentration-based intervals valid for any outcomes in `[0, 1]`.

use serde::{Deserialize, Serialize};

use super::check_alpha;
use crate::error::Result;
use crate::model::{ate_estimate, Design, LipschitzBound, WeightProfile};

const BIAS_GRID: usize = 1001;
const INNER_GRID: usize = 401;
const GOLDEN_ITERS: usize = 100;
const ROOT_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoeffdingKind {
    /// Lower confidence bound; the reported upper end is 1.
    One,
    TwoNaive,
    TwoOptimized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingCi {
    pub lower: f64,
    pub upper: f64,
    pub gamma: f64,
    pub max_bias: f64,
    pub tau_hat: f64,
    pub kind: HoeffdingKind,
}

fn max_piecewise_linear(
    f: impl Fn(f64) -> f64,
    kinks: impl Iterator<Item = f64>,
    maximize: bool,
) -> f64 {
    let grid = (0..BIAS_GRID).map(|i| i as f64 / (BIAS_GRID - 1) as f64);
    let pick = |a: f64, b: f64| if maximize { a.max(b) } else { a.min(b) };
    let init = if maximize {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    grid.chain(kinks.map(|k| k.clamp(0.0, 1.0)))
        .map(&f)
        .fold(init, pick)
}

/// Largest bias `E τ̂ − τ` over the Lipschitz class; the smallest is its negative.
///
/// Each side's contribution is piecewise linear in its boundary mean with
/// kinks where an envelope entry clips, so the grid is augmented with the kinks.
pub fn max_abs_bias(
    rp: &[f64],
    rm: &[f64],
    w_plus: &WeightProfile<f64>,
    w_minus: &WeightProfile<f64>,
    c: LipschitzBound<f64>,
) -> Result<f64> {
    w_plus.check_len(rp.len())?;
    w_minus.check_len(rm.len())?;
    let c = c.value();
    let (wp, wm) = (w_plus.as_slice(), w_minus.as_slice());
    let treated = |a: f64| -> f64 {
        wp.iter()
            .zip(rp)
            .map(|(w, r)| w * ((a + c * r).min(1.0) - 0.5))
            .sum::<f64>()
            - (a - 0.5)
    };
    let control = |b: f64| -> f64 {
        wm.iter()
            .zip(rm)
            .map(|(w, r)| w * ((b - c * r).max(0.0) - 0.5))
            .sum::<f64>()
            - (b - 0.5)
    };
    let t_max = max_piecewise_linear(treated, rp.iter().map(|r| 1.0 - c * r), true);
    let c_min = max_piecewise_linear(control, rm.iter().map(|r| c * r), false);
    Ok(t_max - c_min)
}

fn sum_sq(w_plus: &WeightProfile<f64>, w_minus: &WeightProfile<f64>) -> f64 {
    w_plus.sum_sq() + w_minus.sum_sq()
}

/// `π̄(γ) = max_{b ∈ [0, B]} exp(−2(γ−b)²/S) + exp(−2(γ+b)²/S)`.
pub fn optimized_tail_bound(gamma: f64, max_bias: f64, s: f64) -> f64 {
    let f =
        |b: f64| (-2.0 * (gamma - b).powi(2) / s).exp() + (-2.0 * (gamma + b).powi(2) / s).exp();
    if max_bias <= 0.0 {
        return f(0.0);
    }
    let h = max_bias / (INNER_GRID - 1) as f64;
    let (mut best_i, mut best) = (0usize, f(0.0));
    for i in 1..INNER_GRID {
        let v = f(i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = (best_i as f64 - 1.0).max(0.0) * h;
    let mut hi = ((best_i + 1) as f64 * h).min(max_bias);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    best.max(f1).max(f2).max(f(max_bias))
}

/// Critical value `γ*` for the chosen construction.
pub fn hoeffding_gamma(max_bias: f64, s: f64, alpha: f64, kind: HoeffdingKind) -> Result<f64> {
    check_alpha(alpha)?;
    if s <= 0.0 {
        return Ok(max_bias);
    }
    let spread = |level: f64| ((1.0 / level).ln() * s / 2.0).sqrt();
    Ok(match kind {
        HoeffdingKind::One => max_bias + spread(alpha),
        HoeffdingKind::TwoNaive => max_bias + spread(alpha / 2.0),
        HoeffdingKind::TwoOptimized => {
            let mut lo = max_bias;
            let mut hi = max_bias + spread(alpha / 2.0);
            for _ in 0..ROOT_ITERS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if optimized_tail_bound(mid, max_bias, s) <= alpha {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    })
}

/// Hoeffding interval from the outcomes stored in `design`, clipped to `[−1, 1]`.
pub fn hoeffding_ci(
    design: &Design<f64>,
    w_plus: &WeightProfile<f64>,
    w_minus: &WeightProfile<f64>,
    c: LipschitzBound<f64>,
    alpha: f64,
    kind: HoeffdingKind,
) -> Result<HoeffdingCi> {
    let tau_hat = ate_estimate(design, w_plus, w_minus)?;
    let max_bias = max_abs_bias(
        design.treated.radii(),
        design.control.radii(),
        w_plus,
        w_minus,
        c,
    )?;
    let gamma = hoeffding_gamma(max_bias, sum_sq(w_plus, w_minus), alpha, kind)?;
    let lower = (tau_hat - gamma).max(-1.0);
    let upper = match kind {
        HoeffdingKind::One => 1.0,
        _ => (tau_hat + gamma).min(1.0),
    };
    Ok(HoeffdingCi {
        lower,
        upper,
        gamma,
        max_bias,
        tau_hat,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> WeightProfile<f64> {
        WeightProfile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn bias_examples() {
        let c1 = LipschitzBound::new(1.0).unwrap();
        let b = max_abs_bias(&[0.3], &[0.2], &w(&[1.0]), &w(&[1.0]), c1).unwrap();
        assert!((b - 0.5).abs() < 1e-12);
        let b = max_abs_bias(&[0.3], &[0.2], &w(&[0.0]), &w(&[0.0]), c1).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        let b = max_abs_bias(
            &[0.3],
            &[0.2],
            &w(&[1.0]),
            &w(&[1.0]),
            LipschitzBound::new(0.0).unwrap(),
        )
        .unwrap();
        assert!(b.abs() < 1e-12);
    }

    #[test]
    fn one_sided_closed_form() {
        let g = hoeffding_gamma(0.0, 2.0, (-2.0f64).exp(), HoeffdingKind::One).unwrap();
        assert!((g - 2f64.sqrt()).abs() < 1e-12);
        let g = hoeffding_gamma(0.3, 1.0, 1.0 - 1e-12, HoeffdingKind::One).unwrap();
        assert!((g - 0.3).abs() < 1e-5);
        assert_eq!(
            hoeffding_gamma(0.2, 0.0, 0.05, HoeffdingKind::TwoOptimized).unwrap(),
            0.2
        );
    }

    #[test]
    fn optimized_is_tighter() {
        let naive = hoeffding_gamma(0.1, 0.05, 0.05, HoeffdingKind::TwoNaive).unwrap();
        let opt = hoeffding_gamma(0.1, 0.05, 0.05, HoeffdingKind::TwoOptimized).unwrap();
        assert!(opt < naive);
        assert!(opt > 0.1);
        assert!(optimized_tail_bound(opt, 0.1, 0.05) <= 0.05);
    }
}
