//! Domain types for a sharp RD design and the linear shrinkage estimator.
//!
//! Each side of the cutoff is stored as recentered distances `‖R_i‖` (sorted
//! ascending) together with outcomes in `[0, 1]`. The boundary point itself is
//! implicit: index 0 of every mean profile refers to radius zero.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ordered_sum, Real};

/// Tolerance for invariant checks on weights and mean profiles.
pub const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Treated,
    Control,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Treated => f.write_str("treated"),
            Side::Control => f.write_str("control"),
        }
    }
}

/// Distance used to turn running-variable values into radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
}

fn validate_radii<T: Real>(radii: &[T]) -> Result<()> {
    for (i, r) in radii.iter().enumerate() {
        if !r.is_finite() || *r < T::zero() || (i > 0 && *r < radii[i - 1]) {
            return Err(Error::InvalidRadii { index: i });
        }
    }
    Ok(())
}

fn validate_outcomes<T: Real>(outcomes: &[T]) -> Result<()> {
    for (index, y) in outcomes.iter().enumerate() {
        if !(*y >= T::zero() && *y <= T::one()) {
            return Err(Error::OutOfRangeOutcome {
                index,
                value: y.as_f64(),
            });
        }
    }
    Ok(())
}

/// Observations on one side of the cutoff, sorted by distance to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSample<T = f64> {
    radii: Vec<T>,
    outcomes: Vec<T>,
}

impl<T: Real> SideSample<T> {
    pub fn new(radii: Vec<T>, outcomes: Vec<T>) -> Result<Self> {
        if radii.len() != outcomes.len() {
            return Err(Error::LengthMismatch {
                expected: radii.len(),
                found: outcomes.len(),
            });
        }
        validate_radii(&radii)?;
        validate_outcomes(&outcomes)?;
        Ok(Self { radii, outcomes })
    }

    /// A sample whose outcomes are not yet observed (all set to zero).
    pub fn from_radii(radii: Vec<T>) -> Result<Self> {
        let outcomes = vec![T::zero(); radii.len()];
        Self::new(radii, outcomes)
    }

    /// Same radii, new outcome vector.
    pub fn with_outcomes(&self, outcomes: Vec<T>) -> Result<Self> {
        if outcomes.len() != self.radii.len() {
            return Err(Error::LengthMismatch {
                expected: self.radii.len(),
                found: outcomes.len(),
            });
        }
        validate_outcomes(&outcomes)?;
        Ok(Self {
            radii: self.radii.clone(),
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn outcomes(&self) -> &[T] {
        &self.outcomes
    }

    /// True when every outcome is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.outcomes
            .iter()
            .all(|y| *y == T::zero() || *y == T::one())
    }
}

/// Treated and control samples around a single cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design<T = f64> {
    pub treated: SideSample<T>,
    pub control: SideSample<T>,
    /// Location of the cutoff on the original running-variable scale.
    pub cutoff: T,
    pub norm: Norm,
}

impl<T: Real> Design<T> {
    pub fn new(treated: SideSample<T>, control: SideSample<T>, cutoff: T) -> Self {
        Self {
            treated,
            control,
            cutoff,
            norm: Norm::Euclidean,
        }
    }

    pub fn side(&self, side: Side) -> &SideSample<T> {
        match side {
            Side::Treated => &self.treated,
            Side::Control => &self.control,
        }
    }

    pub fn len(&self) -> usize {
        self.treated.len() + self.control.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lipschitz constant of the conditional mean function.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LipschitzBound<T = f64>(T);

impl<T: Real> LipschitzBound<T> {
    pub fn new(c: T) -> Result<Self> {
        if !c.is_finite() || c < T::zero() {
            return Err(Error::InvalidLipschitz(c.as_f64()));
        }
        Ok(Self(c))
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// Whether an observation at this radius can receive positive minimax weight.
    #[inline]
    pub fn admits(self, radius: T) -> bool {
        self.0 * radius < T::half()
    }
}

/// Nonnegative per-observation weights for one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile<T = f64> {
    w: Vec<T>,
    u: T,
}

impl<T: Real> WeightProfile<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if let Some(i) = w.iter().position(|x| !x.is_finite() || *x < T::zero()) {
            return Err(Error::InvalidWeights(format!(
                "weight {} at index {i} is not a finite nonnegative number",
                w[i]
            )));
        }
        let u = ordered_sum(w.iter().copied());
        Ok(Self { w, u })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            w: vec![T::zero(); n],
            u: T::zero(),
        }
    }

    /// Builds a profile without validation; callers guarantee nonnegativity.
    pub(crate) fn from_vec_unchecked(w: Vec<T>) -> Self {
        let u = ordered_sum(w.iter().copied());
        Self { w, u }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<T> {
        self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Shrinkage mass `u = Σ w_i`.
    #[inline]
    pub fn mass(&self) -> T {
        self.u
    }

    /// First radial moment `k = Σ w_i ‖R_i‖`.
    pub fn moment(&self, radii: &[T]) -> T {
        ordered_sum(self.w.iter().zip(radii).map(|(w, r)| *w * *r))
    }

    pub fn sum_sq(&self) -> T {
        ordered_sum(self.w.iter().map(|w| *w * *w))
    }

    /// Membership in the shrinkage class (`Σ w ≤ 1`).
    pub fn is_shrinkage(&self) -> bool {
        self.u <= T::one() + T::lit(INVARIANT_TOL)
    }

    pub fn check_shrinkage(&self) -> Result<()> {
        if self.is_shrinkage() {
            Ok(())
        } else {
            Err(Error::InvalidWeights(format!(
                "weights sum to {} > 1",
                self.u
            )))
        }
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.w.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self.w.len(),
            });
        }
        Ok(())
    }
}

/// How the entries of a [`MeanProfile`] are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Centered means `θ = p − 1/2` in `[−1/2, 1/2]`.
    Theta,
    /// Success probabilities in `[0, 1]`.
    Probability,
}

/// Conditional means at the boundary (index 0) and at each observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanProfile<T = f64> {
    values: Vec<T>,
    scale: Scale,
}

impl<T: Real> MeanProfile<T> {
    pub fn new(values: Vec<T>, scale: Scale) -> Result<Self> {
        let (lo, hi) = match scale {
            Scale::Theta => (-T::half(), T::half()),
            Scale::Probability => (T::zero(), T::one()),
        };
        let tol = T::lit(INVARIANT_TOL);
        for (i, v) in values.iter().enumerate() {
            if !(*v >= lo - tol && *v <= hi + tol) {
                return Err(Error::InvalidArgument(format!(
                    "mean profile entry {i} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { values, scale })
    }

    pub(crate) fn from_vec_unchecked(values: Vec<T>, scale: Scale) -> Self {
        Self { values, scale }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Boundary value (index 0).
    pub fn boundary(&self) -> T {
        self.values[0]
    }

    pub fn to_theta(&self) -> Self {
        match self.scale {
            Scale::Theta => self.clone(),
            Scale::Probability => Self {
                values: self.values.iter().map(|p| *p - T::half()).collect(),
                scale: Scale::Theta,
            },
        }
    }

    pub fn to_probability(&self) -> Self {
        match self.scale {
            Scale::Probability => self.clone(),
            Scale::Theta => Self {
                values: self.values.iter().map(|t| *t + T::half()).collect(),
                scale: Scale::Probability,
            },
        }
    }

    /// Pairwise check `|v_i − v_j| ≤ C |‖R_i‖ − ‖R_j‖|`, with radius 0 at index 0.
    pub fn satisfies_radial_lipschitz(&self, radii: &[T], c: LipschitzBound<T>) -> bool {
        if self.values.len() != radii.len() + 1 {
            return false;
        }
        let r = |i: usize| if i == 0 { T::zero() } else { radii[i - 1] };
        let tol = T::lit(INVARIANT_TOL);
        let n = self.values.len();
        (0..n).all(|i| {
            (i + 1..n).all(|j| {
                (self.values[i] - self.values[j]).abs() <= c.value() * (r(i) - r(j)).abs() + tol
            })
        })
    }
}

/// Splits `(r, y)` points at `cutoff` into recentered, radius-sorted samples.
///
/// Points with `r >= cutoff` are treated. Sorting is stable, so tied radii keep
/// their input order.
pub fn normalize_design<T: Real>(points: &[(T, T)], cutoff: T) -> Result<Design<T>> {
    for (index, (r, y)) in points.iter().enumerate() {
        if !(*y >= T::zero() && *y <= T::one()) {
            return Err(Error::OutOfRangeOutcome {
                index,
                value: y.as_f64(),
            });
        }
        if !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "running variable at index {index} is not finite"
            )));
        }
    }
    let mut treated: Vec<(T, T)> = Vec::new();
    let mut control: Vec<(T, T)> = Vec::new();
    for &(r, y) in points {
        if r >= cutoff {
            treated.push((r - cutoff, y));
        } else {
            control.push((cutoff - r, y));
        }
    }
    if treated.is_empty() {
        return Err(Error::EmptySide(Side::Treated));
    }
    if control.is_empty() {
        return Err(Error::EmptySide(Side::Control));
    }
    let build = |mut pts: Vec<(T, T)>| {
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite radii"));
        let (radii, outcomes): (Vec<T>, Vec<T>) = pts.into_iter().unzip();
        SideSample::new(radii, outcomes)
    };
    Ok(Design::new(build(treated)?, build(control)?, cutoff))
}

/// `1/2 + Σ w_i (Y_i − 1/2)`.
pub fn shrinkage_estimate<T: Real>(
    sample: &SideSample<T>,
    weights: &WeightProfile<T>,
) -> Result<T> {
    weights.check_len(sample.len())?;
    Ok(T::half() + centered_sum(sample.outcomes(), weights.as_slice()))
}

/// Difference of the two shrinkage estimators; the 1/2 offsets cancel.
pub fn ate_estimate<T: Real>(
    design: &Design<T>,
    w_plus: &WeightProfile<T>,
    w_minus: &WeightProfile<T>,
) -> Result<T> {
    w_plus.check_len(design.treated.len())?;
    w_minus.check_len(design.control.len())?;
    Ok(centered_sum(design.treated.outcomes(), w_plus.as_slice())
        - centered_sum(design.control.outcomes(), w_minus.as_slice()))
}

#[inline]
pub(crate) fn centered_sum<T: Real>(outcomes: &[T], w: &[T]) -> T {
    ordered_sum(w.iter().zip(outcomes).map(|(w, y)| *w * (*y - T::half())))
}
