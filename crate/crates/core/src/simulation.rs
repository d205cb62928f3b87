//! Data-generating processes and the Monte Carlo study runner.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::inference::{hoeffding_ci, Calibrator, HoeffdingKind, InferenceConfig};
use crate::model::{ate_estimate, Design, LipschitzBound, Side, SideSample, WeightProfile};
use crate::rng::{stream_rng, streams};
use crate::scalar::pairwise_sum;
use crate::solver::{solve_ate_weights, solve_gaussian_ate_weights, SolverOptions};

const LEE_SLOPE_GRID: usize = 20_001;

/// Conditional mean of the outcome given the running variable `x ∈ [−1, 1]`
/// (cutoff at 0, treated for `x ≥ 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpSpec {
    Flat {
        level: f64,
    },
    /// `min(½ + C|x|, 1)` treated, `max(½ − C|x|, 0)` control.
    WorstCaseEnvelope {
        #[serde(rename = "C")]
        c: f64,
    },
    /// Polynomials in `x`, lowest degree first, clipped to `[0, 1]`.
    LeePolynomial {
        control: Vec<f64>,
        treated: Vec<f64>,
    },
}

impl DgpSpec {
    pub fn flat() -> Self {
        DgpSpec::Flat { level: 0.5 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DgpSpec::Flat { .. } => "flat",
            DgpSpec::WorstCaseEnvelope { .. } => "worst_case",
            DgpSpec::LeePolynomial { .. } => "lee",
        }
    }

    /// Jump `p₀₊ − p₀₋` at the cutoff.
    pub fn true_tau(&self) -> f64 {
        dgp_mean(self, 0.0, Side::Treated) - dgp_mean(self, 0.0, Side::Control)
    }

    /// Smallest Lipschitz constant of the clipped mean function on `[−1, 1]`.
    ///
    /// Exact for the flat and envelope designs; for polynomials the largest
    /// absolute derivative over a fine grid of unclipped points.
    pub fn lipschitz(&self) -> f64 {
        match self {
            DgpSpec::Flat { .. } => 0.0,
            DgpSpec::WorstCaseEnvelope { c } => *c,
            DgpSpec::LeePolynomial { control, treated } => {
                let slope = |coef: &[f64], lo: f64, hi: f64| -> f64 {
                    (0..LEE_SLOPE_GRID)
                        .map(|i| lo + (hi - lo) * i as f64 / (LEE_SLOPE_GRID - 1) as f64)
                        .filter(|x| (0.0..=1.0).contains(&poly(coef, *x)))
                        .map(|x| poly_derivative(coef, x).abs())
                        .fold(0.0, f64::max)
                };
                slope(control, -1.0, 0.0).max(slope(treated, 0.0, 1.0))
            }
        }
    }
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative(coef: &[f64], x: f64) -> f64 {
    coef.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
}

/// Mean at `x` on `side`, clipped to `[0, 1]`.
pub fn dgp_mean(spec: &DgpSpec, x: f64, side: Side) -> f64 {
    let v = match (spec, side) {
        (DgpSpec::Flat { level }, _) => *level,
        (DgpSpec::WorstCaseEnvelope { c }, Side::Treated) => 0.5 + c * x.abs(),
        (DgpSpec::WorstCaseEnvelope { c }, Side::Control) => 0.5 - c * x.abs(),
        (DgpSpec::LeePolynomial { treated, .. }, Side::Treated) => poly(treated, x),
        (DgpSpec::LeePolynomial { control, .. }, Side::Control) => poly(control, x),
    };
    v.clamp(0.0, 1.0)
}

/// Parses `name = [c0, c1, ...]` lines; `#` starts a comment.
pub fn parse_coefficients(text: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::InvalidArgument(format!("line {}: {msg}", i + 1));
        let (name, rest) = line
            .split_once('=')
            .ok_or_else(|| bad("expected `name = [...]`"))?;
        let rest = rest.trim();
        let inner = rest
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| bad("coefficients must be enclosed in brackets"))?;
        let coef = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| bad(&format!("not a number: {s}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(bad("coefficients must be finite"));
        }
        out.insert(name.trim().to_string(), coef);
    }
    Ok(out)
}

/// Polynomial design from a config with `control` and `treated` entries.
pub fn lee_from_config(text: &str) -> Result<DgpSpec> {
    let mut map = parse_coefficients(text)?;
    let mut take = |k: &str| {
        map.remove(k)
            .ok_or_else(|| Error::InvalidArgument(format!("missing `{k}` coefficients")))
    };
    Ok(DgpSpec::LeePolynomial {
        control: take("control")?,
        treated: take("treated")?,
    })
}

pub const LEE_DEFAULT_CONFIG: &str = "\
# Fifth-degree approximation of the conditional mean, x in [-1, 1], cutoff 0.
control = [0.48, 1.27, 7.18, 20.21, 21.54, 7.33]
treated = [0.52, 0.84, -3.00, 7.99, -9.01, 3.56]
";

/// `n` equally spaced points on `[−1, 1]` at cell midpoints `−1 + (j + ½)·2/n`.
pub fn equally_spaced_points(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -1.0 + (j as f64 + 0.5) * 2.0 / n as f64)
        .collect()
}

/// Design with outcomes unset (all ½), split at 0.
pub fn equally_spaced_design(n: usize) -> Result<Design<f64>> {
    let xs = equally_spaced_points(n);
    let mut rp: Vec<f64> = xs.iter().filter(|x| **x >= 0.0).map(|x| x.abs()).collect();
    let mut rm: Vec<f64> = xs.iter().filter(|x| **x < 0.0).map(|x| x.abs()).collect();
    rp.sort_by(f64::total_cmp);
    rm.sort_by(f64::total_cmp);
    if rp.is_empty() {
        return Err(Error::EmptySide(Side::Treated));
    }
    if rm.is_empty() {
        return Err(Error::EmptySide(Side::Control));
    }
    let half = |r: &Vec<f64>| vec![0.5; r.len()];
    Ok(Design::new(
        SideSample::new(rp.clone(), half(&rp))?,
        SideSample::new(rm.clone(), half(&rm))?,
        0.0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Rdbinary,
    Gauss,
    /// Difference of unweighted means within a common bandwidth.
    LocalMean,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Rdbinary => "rdbinary",
            EstimatorKind::Gauss => "gauss",
            EstimatorKind::LocalMean => "local_mean",
        }
    }
}

/// Weights of an estimator on a design; they do not depend on outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEstimator {
    pub kind: EstimatorKind,
    pub w_plus: WeightProfile<f64>,
    pub w_minus: WeightProfile<f64>,
    /// Largest absolute bias under the Lipschitz class without clipping (Gaussian-type CIs).
    pub linear_bias: f64,
}

fn uniform_bandwidth_weights(rp: &[f64], rm: &[f64], c: f64) -> (Vec<f64>, Vec<f64>) {
    let mut hs: Vec<f64> = rp.iter().chain(rm).copied().collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let h_min = rp[0].max(rm[0]);
    let mut best = (f64::INFINITY, h_min);
    for &h in hs.iter().filter(|h| **h >= h_min) {
        let kp = rp.iter().filter(|r| **r <= h).count() as f64;
        let km = rm.iter().filter(|r| **r <= h).count() as f64;
        let mp = rp.iter().filter(|r| **r <= h).sum::<f64>() / kp;
        let mm = rm.iter().filter(|r| **r <= h).sum::<f64>() / km;
        let mse = (c * (mp + mm)).powi(2) + 0.25 * (1.0 / kp + 1.0 / km);
        if mse < best.0 {
            best = (mse, h);
        }
    }
    let h = best.1;
    let side = |r: &[f64]| {
        let k = r.iter().filter(|x| **x <= h).count() as f64;
        r.iter()
            .map(|x| if *x <= h { 1.0 / k } else { 0.0 })
            .collect::<Vec<_>>()
    };
    (side(rp), side(rm))
}

/// Computes the weights of `kind` on `design` for Lipschitz constant `c`.
pub fn fit_estimator(
    kind: EstimatorKind,
    design: &Design<f64>,
    c: LipschitzBound<f64>,
    opts: &SolverOptions,
) -> Result<FittedEstimator> {
    let (rp, rm) = (design.treated.radii(), design.control.radii());
    if rp.is_empty() {
        return Err(Error::EmptySide(Side::Treated));
    }
    if rm.is_empty() {
        return Err(Error::EmptySide(Side::Control));
    }
    let (wp, wm) = match kind {
        EstimatorKind::Rdbinary => {
            let (p, m) = solve_ate_weights(design, c, opts)?;
            (p.weights, m.weights)
        }
        EstimatorKind::Gauss => {
            let (p, m) = solve_gaussian_ate_weights(
                rp,
                rm,
                c,
                &vec![0.25; rp.len()],
                &vec![0.25; rm.len()],
            )?;
            (p.weights, m.weights)
        }
        EstimatorKind::LocalMean => {
            let (p, m) = uniform_bandwidth_weights(rp, rm, c.value());
            (WeightProfile::new(p)?, WeightProfile::new(m)?)
        }
    };
    let linear_bias = c.value() * (wp.moment(rp) + wm.moment(rm));
    Ok(FittedEstimator {
        kind,
        w_plus: wp,
        w_minus: wm,
        linear_bias,
    })
}

/// Critical value `cv` with `P(|Z + t| ≤ cv) = 1 − α` for `Z ~ N(0, 1)`.
pub fn folded_normal_cv(t: f64, alpha: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    let t = t.abs();
    let cover = |cv: f64| z.cdf(cv - t) - z.cdf(-cv - t);
    let (mut lo, mut hi) = (0.0, t + 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cover(mid) < 1.0 - alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Bias-aware interval `τ̂ ± cv(B/sd)·sd` with `sd² = ¼(Σw₊² + Σw₋²)`, clipped to `[−1, 1]`.
pub fn gaussian_ci(est: &FittedEstimator, tau_hat: f64, alpha: f64) -> (f64, f64) {
    let sd = (0.25 * (est.w_plus.sum_sq() + est.w_minus.sum_sq())).sqrt();
    let half = if sd > 0.0 {
        folded_normal_cv(est.linear_bias / sd, alpha) * sd
    } else {
        est.linear_bias
    };
    ((tau_hat - half).max(-1.0), (tau_hat + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub dgp: DgpSpec,
    pub n: usize,
    /// Replications for point estimates.
    pub replications: usize,
    /// The first `ci_replications` replications also compute intervals.
    pub ci_replications: usize,
    pub alpha: f64,
    #[serde(rename = "C_used")]
    pub c_used: f64,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
    pub inference: InferenceConfig,
    pub solver: SolverOptions,
}

impl StudySpec {
    pub fn new(dgp: DgpSpec, n: usize, c_used: f64) -> Self {
        Self {
            dgp,
            n,
            replications: 3000,
            ci_replications: 1500,
            alpha: 0.05,
            c_used,
            estimators: vec![
                EstimatorKind::Rdbinary,
                EstimatorKind::Gauss,
                EstimatorKind::LocalMean,
            ],
            seed: 0,
            inference: InferenceConfig::default(),
            solver: SolverOptions::default(),
        }
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub root_mse: McEstimate,
    pub bias: McEstimate,
    pub mean_ci_length: Option<McEstimate>,
    pub coverage: Option<McEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub spec: StudySpec,
    pub true_tau: f64,
    pub summaries: Vec<EstimatorSummary>,
}

impl StudyReport {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == kind)
    }

    /// One row per estimator.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dgp,n,C_used,estimator,root_mse,root_mse_se,bias,bias_se,mean_ci_length,mean_ci_length_se,coverage,coverage_se\n",
        );
        let opt = |e: Option<McEstimate>| {
            e.map(|e| (e.value.to_string(), e.se.to_string()))
                .unwrap_or(("NA".into(), "NA".into()))
        };
        for s in &self.summaries {
            let (len, len_se) = opt(s.mean_ci_length);
            let (cov, cov_se) = opt(s.coverage);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.spec.dgp.name(),
                self.spec.n,
                self.spec.c_used,
                s.estimator.name(),
                s.root_mse.value,
                s.root_mse.se,
                s.bias.value,
                s.bias.se,
                len,
                len_se,
                cov,
                cov_se
            ));
        }
        out
    }
}

fn mean_se(xs: &[f64]) -> McEstimate {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = if xs.len() > 1 {
        pairwise_sum(&dev) / (n - 1.0)
    } else {
        0.0
    };
    McEstimate {
        value: mean,
        se: (var / n).sqrt(),
    }
}

/// Bernoulli outcomes of replication `rep`: treated first, then control.
pub fn draw_binary_outcomes(
    means_plus: &[f64],
    means_minus: &[f64],
    seed: u64,
    rep: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, streams::OUTCOMES, rep);
    let mut draw = |p: &f64| if rng.random::<f64>() < *p { 1.0 } else { 0.0 };
    let yp = means_plus.iter().map(&mut draw).collect();
    let ym = means_minus.iter().map(&mut draw).collect();
    (yp, ym)
}

fn side_means(dgp: &DgpSpec, radii: &[f64], side: Side) -> Vec<f64> {
    radii
        .iter()
        .map(|r| dgp_mean(dgp, if side == Side::Treated { *r } else { -*r }, side))
        .collect()
}

struct RepResult {
    errors: Vec<f64>,
    intervals: Vec<Option<(f64, f64)>>,
}

/// Runs the study; weights and the calibration are computed once per design.
pub fn run_mc_study(spec: &StudySpec) -> Result<StudyReport> {
    if spec.replications == 0 {
        return Err(Error::InvalidArgument(
            "replications must be at least 1".into(),
        ));
    }
    if spec.ci_replications > spec.replications {
        return Err(Error::InvalidArgument(
            "ci_replications cannot exceed replications".into(),
        ));
    }
    if spec.estimators.is_empty() {
        return Err(Error::InvalidArgument("no estimators requested".into()));
    }
    crate::inference::check_alpha(spec.alpha)?;
    let design = equally_spaced_design(spec.n)?;
    let c = LipschitzBound::new(spec.c_used)?;
    let fitted = spec
        .estimators
        .iter()
        .map(|k| fit_estimator(*k, &design, c, &spec.solver))
        .collect::<Result<Vec<_>>>()?;
    let calibrator = match fitted.iter().find(|f| f.kind == EstimatorKind::Rdbinary) {
        Some(f) if spec.ci_replications > 0 => Some(Calibrator::new(
            &design,
            &f.w_plus,
            &f.w_minus,
            c,
            spec.inference,
        )?),
        _ => None,
    };
    let mp = side_means(&spec.dgp, design.treated.radii(), Side::Treated);
    let mm = side_means(&spec.dgp, design.control.radii(), Side::Control);
    let tau = spec.dgp.true_tau();

    let reps: Vec<RepResult> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| -> Result<RepResult> {
            let (yp, ym) = draw_binary_outcomes(&mp, &mm, spec.seed, rep as u64);
            let d = Design::new(
                design.treated.with_outcomes(yp)?,
                design.control.with_outcomes(ym)?,
                0.0,
            );
            let mut errors = Vec::with_capacity(fitted.len());
            let mut intervals = Vec::with_capacity(fitted.len());
            for f in &fitted {
                let tau_hat = ate_estimate(&d, &f.w_plus, &f.w_minus)?;
                errors.push(tau_hat - tau);
                intervals.push(if rep < spec.ci_replications {
                    Some(match (f.kind, &calibrator) {
                        (EstimatorKind::Rdbinary, Some(cal)) => {
                            let ci = cal.interval(tau_hat, spec.alpha)?;
                            (ci.lower, ci.upper)
                        }
                        _ => gaussian_ci(f, tau_hat, spec.alpha),
                    })
                } else {
                    None
                });
            }
            Ok(RepResult { errors, intervals })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = fitted
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let err: Vec<f64> = reps.iter().map(|r| r.errors[k]).collect();
            let sq: Vec<f64> = err.iter().map(|e| e * e).collect();
            let mse = mean_se(&sq);
            let root = mse.value.sqrt();
            let root_mse = McEstimate {
                value: root,
                se: if root > 0.0 {
                    mse.se / (2.0 * root)
                } else {
                    0.0
                },
            };
            let ints: Vec<(f64, f64)> = reps.iter().filter_map(|r| r.intervals[k]).collect();
            let (len, cov) = if ints.is_empty() {
                (None, None)
            } else {
                let lens: Vec<f64> = ints.iter().map(|(l, u)| u - l).collect();
                let hits: Vec<f64> = ints
                    .iter()
                    .map(|(l, u)| if *l <= tau && tau <= *u { 1.0 } else { 0.0 })
                    .collect();
                (Some(mean_se(&lens)), Some(mean_se(&hits)))
            };
            EstimatorSummary {
                estimator: f.kind,
                root_mse,
                bias: mean_se(&err),
                mean_ci_length: len,
                coverage: cov,
            }
        })
        .collect();
    Ok(StudyReport {
        spec: spec.clone(),
        true_tau: tau,
        summaries,
    })
}

/// Coverage of a Hoeffding interval when outcomes are Beta distributed with
/// the design's means (point masses at means 0 and 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedCoverageSpec {
    pub dgp: DgpSpec,
    pub n: usize,
    #[serde(rename = "C_used")]
    pub c_used: f64,
    pub alpha: f64,
    pub kind: HoeffdingKind,
    /// Beta concentration `a + b`.
    pub concentration: f64,
    pub replications: usize,
    pub seed: u64,
}

pub fn hoeffding_coverage(spec: &BoundedCoverageSpec) -> Result<McEstimate> {
    if spec.replications == 0 {
        return Err(Error::InvalidArgument(
            "replications must be at least 1".into(),
        ));
    }
    if !(spec.concentration > 0.0) {
        return Err(Error::InvalidArgument(
            "concentration must be positive".into(),
        ));
    }
    let design = equally_spaced_design(spec.n)?;
    let c = LipschitzBound::new(spec.c_used)?;
    let fit = fit_estimator(
        EstimatorKind::Rdbinary,
        &design,
        c,
        &SolverOptions::default(),
    )?;
    let mp = side_means(&spec.dgp, design.treated.radii(), Side::Treated);
    let mm = side_means(&spec.dgp, design.control.radii(), Side::Control);
    let tau = spec.dgp.true_tau();
    let k = spec.concentration;
    let hits: Vec<f64> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut rng = stream_rng(spec.seed, streams::OUTCOMES, rep as u64);
            let mut draw = |m: &f64| -> Result<f64> {
                if *m <= 0.0 || *m >= 1.0 {
                    return Ok(m.clamp(0.0, 1.0));
                }
                let beta =
                    Beta::new(m * k, (1.0 - m) * k).map_err(|e| Error::Numerical(e.to_string()))?;
                Ok(beta.sample(&mut rng))
            };
            let yp = mp.iter().map(&mut draw).collect::<Result<Vec<_>>>()?;
            let ym = mm.iter().map(&mut draw).collect::<Result<Vec<_>>>()?;
            let d = Design::new(
                design.treated.with_outcomes(yp)?,
                design.control.with_outcomes(ym)?,
                0.0,
            );
            let ci = hoeffding_ci(&d, &fit.w_plus, &fit.w_minus, c, spec.alpha, spec.kind)?;
            Ok(if ci.lower <= tau && tau <= ci.upper {
                1.0
            } else {
                0.0
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_se(&hits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dgp_examples() {
        assert_eq!(dgp_mean(&DgpSpec::flat(), 0.3, Side::Treated), 0.5);
        let wc = DgpSpec::WorstCaseEnvelope { c: 0.5 };
        assert!((dgp_mean(&wc, 0.4, Side::Treated) - 0.7).abs() < 1e-15);
        assert!((dgp_mean(&wc, -0.4, Side::Control) - 0.3).abs() < 1e-15);
        let lee = lee_from_config(LEE_DEFAULT_CONFIG).unwrap();
        assert_eq!(dgp_mean(&lee, 0.0, Side::Control), 0.48);
        assert_eq!(dgp_mean(&lee, 0.0, Side::Treated), 0.52);
        assert!((lee.true_tau() - 0.04).abs() < 1e-12);
        assert!(lee.lipschitz() > 1.0);
    }

    #[test]
    fn config_errors_name_the_line() {
        let err = parse_coefficients("a = [1, 2]\n\nb = [x]\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse_coefficients("c = 1, 2").is_err());
        assert!(lee_from_config("control = [1]").is_err());
    }

    #[test]
    fn midpoint_design() {
        let d = equally_spaced_design(4).unwrap();
        assert_eq!(d.treated.radii(), &[0.25, 0.75]);
        assert_eq!(d.control.radii(), &[0.25, 0.75]);
    }

    #[test]
    fn folded_normal_reduces_to_normal() {
        assert!((folded_normal_cv(0.0, 0.05) - 1.959963984540054).abs() < 1e-9);
        assert!(folded_normal_cv(3.0, 0.05) > 3.0 + 1.6);
    }

    #[test]
    fn envelope_dgp_is_lipschitz() {
        let c = 0.7;
        let dgp = DgpSpec::WorstCaseEnvelope { c };
        let d = equally_spaced_design(40).unwrap();
        let mut v = vec![0.5];
        v.extend(side_means(&dgp, d.treated.radii(), Side::Treated));
        let prof = crate::model::MeanProfile::new(v, crate::model::Scale::Probability).unwrap();
        assert!(prof.satisfies_radial_lipschitz(d.treated.radii(), LipschitzBound::new(c).unwrap()));
    }

    #[test]
    fn small_study_is_deterministic() {
        let mut spec = StudySpec::new(DgpSpec::flat(), 10, 0.5);
        spec.replications = 40;
        spec.ci_replications = 5;
        let a = run_mc_study(&spec).unwrap();
        let b = run_mc_study(&spec).unwrap();
        assert_eq!(a, b);
        let rd = a.summary(EstimatorKind::Rdbinary).unwrap();
        assert!(rd.coverage.unwrap().value >= 0.0);
        assert!(a.to_csv().lines().count() == 4);
    }
}
