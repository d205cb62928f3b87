use serde::{Deserialize, Serialize};

use super::{check_tau0, Direction};
use crate::error::{Error, Result};
use crate::model::{Design, LipschitzBound, MeanProfile, Scale};

/// Success probabilities for both sides; index 0 of each profile is the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliJointProfile {
    pub p_plus: MeanProfile<f64>,
    pub p_minus: MeanProfile<f64>,
}

impl BernoulliJointProfile {
    pub fn new(p_plus: MeanProfile<f64>, p_minus: MeanProfile<f64>) -> Self {
        Self {
            p_plus: p_plus.to_probability(),
            p_minus: p_minus.to_probability(),
        }
    }

    /// Probabilities of the observations only, without the boundary entry.
    pub fn treated_obs(&self) -> &[f64] {
        &self.p_plus.values()[1..]
    }

    pub fn control_obs(&self) -> &[f64] {
        &self.p_minus.values()[1..]
    }
}

/// Admissible treated boundary means under `τ = τ₀`.
pub fn anchor_range(tau0: f64) -> (f64, f64) {
    (tau0.max(0.0), (1.0 + tau0).min(1.0))
}

#[inline]
pub(crate) fn treated_prob(p: f64, cr: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Right => (p + cr).min(1.0),
        Direction::Left => (p - cr).max(0.0),
    }
}

#[inline]
pub(crate) fn control_prob(q: f64, cr: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Right => (q - cr).max(0.0),
        Direction::Left => (q + cr).min(1.0),
    }
}

/// Anchor `j` of an `m`-point grid as `(p₀₊, p₀₋)`.
///
/// Both coordinates are affine in `j` with nonnegative slopes, and `p₀₊`
/// (resp. `p₀₋`) is nondecreasing (resp. nonincreasing) in `τ₀` at fixed `j`.
pub(crate) fn grid_anchor(tau0: f64, j: usize, m: usize) -> (f64, f64) {
    let (lo, hi) = anchor_range(tau0);
    let s = if m <= 1 {
        0.5
    } else {
        j as f64 / (m - 1) as f64
    };
    let step = s * (hi - lo);
    let p = (lo + step).clamp(0.0, 1.0);
    let q = ((lo - tau0) + step).clamp(0.0, 1.0);
    (p, q)
}

/// The envelope pair at treated anchor `p` under `τ = τ₀`.
pub fn envelope_p_profiles(
    p: f64,
    tau0: f64,
    c: LipschitzBound<f64>,
    design: &Design<f64>,
    direction: Direction,
) -> Result<BernoulliJointProfile> {
    check_tau0(tau0)?;
    let (lo, hi) = anchor_range(tau0);
    if !(p >= lo - 1e-15 && p <= hi + 1e-15) {
        return Err(Error::AnchorOutOfRange { value: p, lo, hi });
    }
    let p = p.clamp(lo, hi);
    let q = (p - tau0).clamp(0.0, 1.0);
    Ok(profiles_at(
        p,
        q,
        c.value(),
        design.treated.radii(),
        design.control.radii(),
        direction,
    ))
}

pub(crate) fn profiles_at(
    p: f64,
    q: f64,
    c: f64,
    rp: &[f64],
    rm: &[f64],
    direction: Direction,
) -> BernoulliJointProfile {
    let mut plus = Vec::with_capacity(rp.len() + 1);
    plus.push(p);
    plus.extend(rp.iter().map(|r| treated_prob(p, c * r, direction)));
    let mut minus = Vec::with_capacity(rm.len() + 1);
    minus.push(q);
    minus.extend(rm.iter().map(|r| control_prob(q, c * r, direction)));
    BernoulliJointProfile {
        p_plus: MeanProfile::from_vec_unchecked(plus, Scale::Probability),
        p_minus: MeanProfile::from_vec_unchecked(minus, Scale::Probability),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SideSample;

    fn design(rp: &[f64], rm: &[f64]) -> Design<f64> {
        Design::new(
            SideSample::from_radii(rp.to_vec()).unwrap(),
            SideSample::from_radii(rm.to_vec()).unwrap(),
            0.0,
        )
    }

    #[test]
    fn formula_and_clipping() {
        let c = LipschitzBound::new(1.0).unwrap();
        let pr =
            envelope_p_profiles(0.5, 0.0, c, &design(&[0.3], &[0.2]), Direction::Right).unwrap();
        assert_eq!(pr.p_plus.values(), &[0.5, 0.8]);
        assert!((pr.p_minus.values()[1] - 0.3).abs() < 1e-15);
        let pr =
            envelope_p_profiles(0.9, 0.0, c, &design(&[0.3], &[0.2]), Direction::Right).unwrap();
        assert_eq!(pr.p_plus.values()[1], 1.0);
        let pr = envelope_p_profiles(0.2, 0.2, c, &design(&[0.3], &[0.2, 0.4]), Direction::Right)
            .unwrap();
        assert_eq!(pr.p_minus.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn left_mirrors() {
        let c = LipschitzBound::new(1.0).unwrap();
        let pr =
            envelope_p_profiles(0.5, 0.0, c, &design(&[0.3], &[0.2]), Direction::Left).unwrap();
        assert!((pr.p_plus.values()[1] - 0.2).abs() < 1e-15);
        assert!((pr.p_minus.values()[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn anchor_outside_range() {
        let c = LipschitzBound::new(1.0).unwrap();
        let d = design(&[0.3], &[0.2]);
        assert!(matches!(
            envelope_p_profiles(0.1, 0.2, c, &d, Direction::Right),
            Err(Error::AnchorOutOfRange { .. })
        ));
        assert!(envelope_p_profiles(0.5, 1.5, c, &d, Direction::Right).is_err());
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(grid_anchor(0.3, 0, 11), (0.3, 0.0));
        assert_eq!(grid_anchor(0.3, 10, 11), (1.0, 0.7));
        assert_eq!(grid_anchor(1.0, 5, 11), (1.0, 0.0));
        assert_eq!(grid_anchor(-1.0, 5, 11), (0.0, 1.0));
    }
}
