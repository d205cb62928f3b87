use super::{BernoulliJointProfile, Comparison, EXACT_MAX_N, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::WeightProfile;

/// Which observation a statistic term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Term {
    Treated(usize),
    Control(usize),
}

/// The statistic `Σw₊(Y₊ − ½) − Σw₋(Y₋ − ½)` written as `base + Σ coef·Y`
/// over the positively weighted observations.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Statistic {
    pub terms: Vec<Term>,
    pub coef: Vec<f64>,
    pub base: f64,
}

impl Statistic {
    pub fn new(wp: &[f64], wm: &[f64]) -> Self {
        let mut terms = Vec::new();
        let mut coef = Vec::new();
        let mut base = 0.0;
        for (i, &w) in wp.iter().enumerate() {
            if w > 0.0 {
                terms.push(Term::Treated(i));
                coef.push(w);
                base -= 0.5 * w;
            }
        }
        for (i, &w) in wm.iter().enumerate() {
            if w > 0.0 {
                terms.push(Term::Control(i));
                coef.push(-w);
                base += 0.5 * w;
            }
        }
        Self { terms, coef, base }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Largest attainable value `(u₊ + u₋)/2`.
    pub fn max_value(&self) -> f64 {
        self.coef.iter().map(|c| 0.5 * c.abs()).sum()
    }

    /// Success probability of each term under `profile`.
    pub fn probs(&self, profile: &BernoulliJointProfile) -> Vec<f64> {
        let (tp, cp) = (profile.treated_obs(), profile.control_obs());
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Treated(i) => tp[i],
                Term::Control(i) => cp[i],
            })
            .collect()
    }
}

/// The support of the statistic and the map from outcome vectors to it.
///
/// Outcome vector `k` sets `Y_j = 1` for every bit `j` set in `k`. Values
/// within [`TIE_TOL`] of their predecessor are merged.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub(crate) stat: Statistic,
    support: Vec<f64>,
    group: Vec<u32>,
}

impl ExactDistribution {
    pub fn new(wp: &WeightProfile<f64>, wm: &WeightProfile<f64>) -> Result<Self> {
        Self::from_statistic(Statistic::new(wp.as_slice(), wm.as_slice()))
    }

    pub(crate) fn from_statistic(stat: Statistic) -> Result<Self> {
        let n = stat.len();
        if n > EXACT_MAX_N {
            return Err(Error::TooLarge {
                n,
                max: EXACT_MAX_N,
            });
        }
        let size = 1usize << n;
        let mut values = Vec::with_capacity(size);
        values.push(stat.base);
        for &c in &stat.coef {
            for k in 0..values.len() {
                values.push(values[k] + c);
            }
        }
        let mut order: Vec<u32> = (0..size as u32).collect();
        order.sort_by(|a, b| values[*a as usize].total_cmp(&values[*b as usize]));
        let mut support: Vec<f64> = Vec::new();
        let mut group = vec![0u32; size];
        let mut prev = f64::NEG_INFINITY;
        for &k in &order {
            let v = values[k as usize];
            if support.is_empty() || v - prev > TIE_TOL {
                support.push(v);
            }
            prev = v;
            group[k as usize] = (support.len() - 1) as u32;
        }
        Ok(Self {
            stat,
            support,
            group,
        })
    }

    /// Sorted distinct attainable values.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn n_terms(&self) -> usize {
        self.stat.len()
    }

    /// Probability of each support point when term `j` succeeds with probability `q[j]`.
    pub(crate) fn group_probs(&self, q: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
        debug_assert_eq!(q.len(), self.stat.len());
        scratch.clear();
        scratch.push(1.0);
        for &qj in q {
            let half = scratch.len();
            for k in 0..half {
                let p = scratch[k];
                scratch.push(p * qj);
                scratch[k] = p * (1.0 - qj);
            }
        }
        let mut out = vec![0.0; self.support.len()];
        for (p, g) in scratch.iter().zip(&self.group) {
            out[*g as usize] += p;
        }
        out
    }

    /// `P(τ̂ > γ)` or `P(τ̂ < γ)` with the tolerance convention of [`TIE_TOL`].
    pub fn tail_prob(
        &self,
        profile: &BernoulliJointProfile,
        gamma: f64,
        comparison: Comparison,
    ) -> f64 {
        let q = self.stat.probs(profile);
        let probs = self.group_probs(&q, &mut Vec::new());
        tail_from_groups(&self.support, &probs, gamma, comparison)
    }
}

pub(crate) fn tail_from_groups(
    support: &[f64],
    probs: &[f64],
    gamma: f64,
    comparison: Comparison,
) -> f64 {
    let total: f64 = match comparison {
        Comparison::Greater => support
            .iter()
            .zip(probs)
            .filter(|(v, _)| **v > gamma + TIE_TOL)
            .map(|(_, p)| p)
            .sum(),
        Comparison::Less => support
            .iter()
            .zip(probs)
            .filter(|(v, _)| **v < gamma - TIE_TOL)
            .map(|(_, p)| p)
            .sum(),
    };
    total.clamp(0.0, 1.0)
}

/// Rejection probability by enumerating all outcome vectors of the weighted observations.
pub fn rejection_prob_exact(
    w_plus: &WeightProfile<f64>,
    w_minus: &WeightProfile<f64>,
    profile: &BernoulliJointProfile,
    gamma: f64,
    comparison: Comparison,
) -> Result<f64> {
    w_plus.check_len(profile.treated_obs().len())?;
    w_minus.check_len(profile.control_obs().len())?;
    Ok(ExactDistribution::new(w_plus, w_minus)?.tail_prob(profile, gamma, comparison))
}
