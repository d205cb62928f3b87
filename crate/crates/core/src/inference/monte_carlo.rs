use rand::Rng;

use super::exact::Statistic;
use super::{BernoulliJointProfile, Comparison, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::WeightProfile;
use crate::rng::{stream_rng, streams};

/// The statistic in fixed point; sums are exact and order independent.
///
/// Power-of-two scale; any partial sum fits in `i64`.
#[derive(Debug, Clone)]
pub(crate) struct FixedStatistic {
    pub coef: Vec<i64>,
    scale: f64,
    base: f64,
}

impl FixedStatistic {
    pub fn new(stat: &Statistic) -> Self {
        let total: f64 = stat.coef.iter().map(|c| c.abs()).sum();
        let mut exp = 60i32;
        while exp > -60 && total * 2f64.powi(exp) >= 2f64.powi(62) {
            exp -= 1;
        }
        let scale = 2f64.powi(exp);
        Self {
            coef: stat
                .coef
                .iter()
                .map(|c| (c * scale).round() as i64)
                .collect(),
            scale,
            base: stat.base,
        }
    }

    #[inline]
    pub fn value(&self, acc: i64) -> f64 {
        self.base + acc as f64 / self.scale
    }
}

/// Uniform deviates shared by every anchor and every `τ₀` of one calibration.
///
/// Stored term-major: `u[t * n_sims + s]` drives term `t` in simulation `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrnDraws {
    n_sims: usize,
    n_terms: usize,
    u: Vec<f64>,
}

impl CrnDraws {
    pub fn new(n_terms: usize, n_sims: usize, seed: u64, index: u64) -> Result<Self> {
        if n_sims == 0 {
            return Err(Error::ZeroSims);
        }
        let mut rng = stream_rng(seed, streams::CALIBRATION, index);
        let u = (0..n_terms * n_sims).map(|_| rng.random::<f64>()).collect();
        Ok(Self { n_sims, n_terms, u })
    }

    pub fn n_sims(&self) -> usize {
        self.n_sims
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub(crate) fn column(&self, t: usize) -> &[f64] {
        &self.u[t * self.n_sims..(t + 1) * self.n_sims]
    }

    /// Fixed-point statistics with `Y_t = 1{U < q_t}`.
    pub(crate) fn accumulate(&self, fixed: &FixedStatistic, q: &[f64]) -> Vec<i64> {
        let mut acc = vec![0i64; self.n_sims];
        for (t, (&c, &qt)) in fixed.coef.iter().zip(q).enumerate() {
            for (a, &u) in acc.iter_mut().zip(self.column(t)) {
                if u < qt {
                    *a += c;
                }
            }
        }
        acc
    }
}

pub(crate) fn count_tail(
    values: impl Iterator<Item = f64>,
    gamma: f64,
    comparison: Comparison,
) -> usize {
    match comparison {
        Comparison::Greater => values.filter(|v| *v > gamma + TIE_TOL).count(),
        Comparison::Less => values.filter(|v| *v < gamma - TIE_TOL).count(),
    }
}

/// Monte Carlo rejection probability; deterministic in `seed`.
pub fn rejection_prob_mc(
    w_plus: &WeightProfile<f64>,
    w_minus: &WeightProfile<f64>,
    profile: &BernoulliJointProfile,
    gamma: f64,
    comparison: Comparison,
    n_sims: usize,
    seed: u64,
) -> Result<f64> {
    if n_sims == 0 {
        return Err(Error::ZeroSims);
    }
    w_plus.check_len(profile.treated_obs().len())?;
    w_minus.check_len(profile.control_obs().len())?;
    let stat = Statistic::new(w_plus.as_slice(), w_minus.as_slice());
    let fixed = FixedStatistic::new(&stat);
    let draws = CrnDraws::new(stat.len(), n_sims, seed, 0)?;
    let acc = draws.accumulate(&fixed, &stat.probs(profile));
    let hits = count_tail(acc.iter().map(|a| fixed.value(*a)), gamma, comparison);
    Ok(hits as f64 / n_sims as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MeanProfile, Scale};

    fn half_profile() -> BernoulliJointProfile {
        BernoulliJointProfile::new(
            MeanProfile::new(vec![0.5, 0.5], Scale::Probability).unwrap(),
            MeanProfile::new(vec![0.5, 0.5], Scale::Probability).unwrap(),
        )
    }

    #[test]
    fn matches_quarter() {
        let w = WeightProfile::new(vec![1.0]).unwrap();
        let r = rejection_prob_mc(
            &w,
            &w,
            &half_profile(),
            0.5,
            Comparison::Greater,
            100_000,
            7,
        )
        .unwrap();
        assert!((r - 0.25).abs() < 0.004, "{r}");
        let again = rejection_prob_mc(
            &w,
            &w,
            &half_profile(),
            0.5,
            Comparison::Greater,
            100_000,
            7,
        )
        .unwrap();
        assert_eq!(r.to_bits(), again.to_bits());
    }

    #[test]
    fn zero_sims() {
        let w = WeightProfile::new(vec![1.0]).unwrap();
        assert_eq!(
            rejection_prob_mc(&w, &w, &half_profile(), 0.5, Comparison::Greater, 0, 0),
            Err(Error::ZeroSims)
        );
    }

    #[test]
    fn fixed_point_round_trip() {
        let stat = Statistic::new(&[0.3, 0.2], &[0.1]);
        let fixed = FixedStatistic::new(&stat);
        let all = fixed.coef.iter().sum::<i64>();
        assert!((fixed.value(all) - (0.15 + 0.1 - 0.05)).abs() < 1e-15);
        assert!((fixed.value(0) - (-0.25 + 0.05)).abs() < 1e-15);
    }
}
