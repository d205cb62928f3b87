use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::envelope::{control_prob, grid_anchor, treated_prob};
use super::exact::{tail_from_groups, ExactDistribution, Statistic, Term};
use super::monte_carlo::{count_tail, CrnDraws, FixedStatistic};
use super::{
    check_alpha, check_tau0, Direction, InferenceConfig, Method, MethodChoice, AUTO_EXACT_MAX,
    EXACT_MAX_N, MC_GRID_STEP,
};
use crate::error::{Error, Result};
use crate::model::{Design, LipschitzBound, WeightProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCalibration {
    pub tau0: f64,
    pub alpha: f64,
    pub gamma_right: f64,
    pub gamma_left: Option<f64>,
    pub anchor_grid: usize,
    pub n_sims: usize,
    pub seed: u64,
    pub method: Method,
}

enum Engine {
    Exact(ExactDistribution),
    MonteCarlo {
        fixed: FixedStatistic,
        draws: CrnDraws,
    },
}

type CacheKey = (u64, Direction, u64);

/// Worst-case rejection probabilities and critical values for fixed weights.
///
/// The outcome draws (Monte Carlo) or the support (exact) are built once and
/// reused for every `τ₀`; critical values are memoized.
pub struct Calibrator {
    stat: Statistic,
    cr: Vec<f64>,
    engine: Engine,
    config: InferenceConfig,
    cache: Mutex<HashMap<CacheKey, f64>>,
}

impl std::fmt::Debug for Calibrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Calibrator")
            .field("terms", &self.stat.len())
            .field("method", &self.method())
            .field("config", &self.config)
            .finish()
    }
}

impl Calibrator {
    pub fn new(
        design: &Design<f64>,
        w_plus: &WeightProfile<f64>,
        w_minus: &WeightProfile<f64>,
        c: LipschitzBound<f64>,
        config: InferenceConfig,
    ) -> Result<Self> {
        Self::from_radii(
            design.treated.radii(),
            design.control.radii(),
            w_plus,
            w_minus,
            c,
            config,
        )
    }

    pub fn from_radii(
        rp: &[f64],
        rm: &[f64],
        w_plus: &WeightProfile<f64>,
        w_minus: &WeightProfile<f64>,
        c: LipschitzBound<f64>,
        config: InferenceConfig,
    ) -> Result<Self> {
        w_plus.check_len(rp.len())?;
        w_minus.check_len(rm.len())?;
        if config.anchor_grid == 0 {
            return Err(Error::InvalidArgument(
                "anchor grid must have at least one point".into(),
            ));
        }
        let stat = Statistic::new(w_plus.as_slice(), w_minus.as_slice());
        let cr = stat
            .terms
            .iter()
            .map(|t| match *t {
                Term::Treated(i) => c.value() * rp[i],
                Term::Control(i) => c.value() * rm[i],
            })
            .collect();
        let n = stat.len();
        let method = match config.method {
            MethodChoice::Exact => Method::Exact,
            MethodChoice::MonteCarlo => Method::MonteCarlo,
            MethodChoice::Auto if n <= AUTO_EXACT_MAX => Method::Exact,
            MethodChoice::Auto => Method::MonteCarlo,
        };
        let engine = match method {
            Method::Exact => Engine::Exact(ExactDistribution::from_statistic(stat.clone())?),
            Method::MonteCarlo => Engine::MonteCarlo {
                fixed: FixedStatistic::new(&stat),
                draws: CrnDraws::new(n, config.n_sims, config.seed, 0)?,
            },
        };
        Ok(Self {
            stat,
            cr,
            engine,
            config,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn method(&self) -> Method {
        match self.engine {
            Engine::Exact(_) => Method::Exact,
            Engine::MonteCarlo { .. } => Method::MonteCarlo,
        }
    }

    pub fn config(&self) -> &InferenceConfig {
        &self.config
    }

    /// Number of positively weighted observations.
    pub fn n_terms(&self) -> usize {
        self.stat.len()
    }

    /// Success probabilities of every term at anchor `j`.
    fn term_probs(&self, tau0: f64, j: usize, direction: Direction) -> Vec<f64> {
        let (p, q) = grid_anchor(tau0, j, self.config.anchor_grid);
        self.stat
            .terms
            .iter()
            .zip(&self.cr)
            .map(|(t, cr)| match t {
                Term::Treated(_) => treated_prob(p, *cr, direction),
                Term::Control(_) => control_prob(q, *cr, direction),
            })
            .collect()
    }

    fn exact_group_probs(
        &self,
        dist: &ExactDistribution,
        tau0: f64,
        direction: Direction,
    ) -> Vec<Vec<f64>> {
        (0..self.config.anchor_grid)
            .into_par_iter()
            .map_init(Vec::new, |scratch, j| {
                dist.group_probs(&self.term_probs(tau0, j, direction), scratch)
            })
            .collect()
    }

    /// Visits the accumulated statistics at every anchor in grid order.
    ///
    /// Success probabilities are nondecreasing along the grid, so each draw
    /// switches on at most once; `visit` gets `changed = false` when no draw
    /// switched since the previous anchor.
    fn sweep(
        &self,
        fixed: &FixedStatistic,
        draws: &CrnDraws,
        tau0: f64,
        direction: Direction,
        mut visit: impl FnMut(&[i64], bool),
    ) {
        let m = self.config.anchor_grid;
        let n_sims = draws.n_sims();
        let n_terms = self.stat.len();
        let mut probs = vec![0.0f64; n_terms * m];
        for j in 0..m {
            for (t, q) in self.term_probs(tau0, j, direction).into_iter().enumerate() {
                probs[t * m + j] = q;
            }
        }
        let mut counts = vec![0usize; m + 1];
        let mut first = vec![0u32; n_terms * n_sims];
        for t in 0..n_terms {
            let col = draws.column(t);
            let qt = &probs[t * m..(t + 1) * m];
            for (s, &u) in col.iter().enumerate() {
                let f = qt.partition_point(|q| *q <= u);
                first[t * n_sims + s] = f as u32;
                counts[f] += 1;
            }
        }
        let mut offsets = vec![0usize; m + 2];
        for j in 0..=m {
            offsets[j + 1] = offsets[j] + counts[j];
        }
        let mut events = vec![(0u32, 0u32); offsets[m]];
        let mut fill = offsets.clone();
        for t in 0..n_terms {
            for s in 0..n_sims {
                let f = first[t * n_sims + s] as usize;
                if f < m {
                    events[fill[f]] = (t as u32, s as u32);
                    fill[f] += 1;
                }
            }
        }
        let mut acc = vec![0i64; n_sims];
        for j in 0..m {
            for &(t, s) in &events[offsets[j]..offsets[j + 1]] {
                acc[s as usize] += fixed.coef[t as usize];
            }
            visit(&acc, j == 0 || counts[j] > 0);
        }
    }

    /// `max_p P(τ̂ > γ)` (right) or `max_p P(τ̂ < γ)` (left) over the anchor grid.
    pub fn worst_rejection(&self, tau0: f64, gamma: f64, direction: Direction) -> Result<f64> {
        check_tau0(tau0)?;
        let cmp = direction.comparison();
        Ok(match &self.engine {
            Engine::Exact(dist) => self
                .exact_group_probs(dist, tau0, direction)
                .iter()
                .map(|g| tail_from_groups(dist.support(), g, gamma, cmp))
                .fold(0.0, f64::max),
            Engine::MonteCarlo { fixed, draws } => {
                let mut best = 0usize;
                self.sweep(fixed, draws, tau0, direction, |acc, changed| {
                    if changed {
                        best =
                            best.max(count_tail(acc.iter().map(|a| fixed.value(*a)), gamma, cmp));
                    }
                });
                best as f64 / draws.n_sims() as f64
            }
        })
    }

    /// Smallest (right) or largest (left) candidate `γ` whose worst-case
    /// rejection probability is at most `level`.
    pub fn critical_value(&self, tau0: f64, level: f64, direction: Direction) -> Result<f64> {
        check_tau0(tau0)?;
        check_alpha(level)?;
        let key = (tau0.to_bits(), direction, level.to_bits());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = match &self.engine {
            Engine::Exact(dist) => self.exact_critical(dist, tau0, level, direction),
            Engine::MonteCarlo { fixed, draws } => {
                self.mc_critical(fixed, draws, tau0, level, direction)
            }
        };
        self.cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    fn exact_critical(
        &self,
        dist: &ExactDistribution,
        tau0: f64,
        level: f64,
        direction: Direction,
    ) -> f64 {
        let support = dist.support();
        let g = support.len();
        let groups = self.exact_group_probs(dist, tau0, direction);
        let mut pi = vec![0.0f64; g];
        for probs in &groups {
            match direction {
                Direction::Right => {
                    let mut tail = 0.0;
                    for k in (0..g).rev() {
                        pi[k] = pi[k].max(tail);
                        tail += probs[k];
                    }
                }
                Direction::Left => {
                    let mut tail = 0.0;
                    for k in 0..g {
                        pi[k] = pi[k].max(tail);
                        tail += probs[k];
                    }
                }
            }
        }
        let worst = |k: usize| {
            groups
                .iter()
                .map(|p| tail_from_groups(support, p, support[k], direction.comparison()))
                .fold(0.0, f64::max)
        };
        match direction {
            Direction::Right => {
                let mut k = (0..g).find(|k| pi[*k] <= level).unwrap_or(g - 1);
                while k + 1 < g && worst(k) > level {
                    k += 1;
                }
                support[k]
            }
            Direction::Left => {
                let mut k = (0..g).rev().find(|k| pi[*k] <= level).unwrap_or(0);
                while k > 0 && worst(k) > level {
                    k -= 1;
                }
                support[k]
            }
        }
    }

    fn mc_critical(
        &self,
        fixed: &FixedStatistic,
        draws: &CrnDraws,
        tau0: f64,
        level: f64,
        direction: Direction,
    ) -> f64 {
        let n = draws.n_sims();
        let k = ((level * n as f64) + 1e-9).floor() as usize;
        let k = k.min(n - 1);
        let mut scratch = vec![0i64; n];
        let mut best: Option<i64> = None;
        self.sweep(fixed, draws, tau0, direction, |acc, changed| {
            if !changed {
                return;
            }
            scratch.copy_from_slice(acc);
            let q = match direction {
                Direction::Right => *scratch.select_nth_unstable(n - 1 - k).1,
                Direction::Left => *scratch.select_nth_unstable(k).1,
            };
            best = Some(match (best, direction) {
                (None, _) => q,
                (Some(b), Direction::Right) => b.max(q),
                (Some(b), Direction::Left) => b.min(q),
            });
        });
        let raw = fixed.value(best.unwrap_or(0));
        if self.stat.len() <= EXACT_MAX_N {
            return raw;
        }
        snap_to_grid(raw, self.stat.max_value(), direction)
    }

    /// Two-sided calibration with `α/2` in each tail.
    pub fn calibrate(&self, tau0: f64, alpha: f64) -> Result<TestCalibration> {
        check_alpha(alpha)?;
        let gamma_right = self.critical_value(tau0, alpha / 2.0, Direction::Right)?;
        let gamma_left = self.critical_value(tau0, alpha / 2.0, Direction::Left)?;
        Ok(self.report(tau0, alpha, gamma_right, Some(gamma_left)))
    }

    /// One-sided calibration against `τ > τ₀`.
    pub fn calibrate_one_sided(&self, tau0: f64, alpha: f64) -> Result<TestCalibration> {
        let gamma_right = self.critical_value(tau0, alpha, Direction::Right)?;
        Ok(self.report(tau0, alpha, gamma_right, None))
    }

    fn report(
        &self,
        tau0: f64,
        alpha: f64,
        gamma_right: f64,
        gamma_left: Option<f64>,
    ) -> TestCalibration {
        TestCalibration {
            tau0,
            alpha,
            gamma_right,
            gamma_left,
            anchor_grid: self.config.anchor_grid,
            n_sims: match self.engine {
                Engine::Exact(_) => 0,
                Engine::MonteCarlo { .. } => self.config.n_sims,
            },
            seed: self.config.seed,
            method: self.method(),
        }
    }

    /// Whether the two-sided level-`α` test rejects `τ = τ₀` at `τ̂`.
    pub fn rejects(&self, tau0: f64, tau_hat: f64, alpha: f64) -> Result<bool> {
        Ok(self.rejects_right(tau0, tau_hat, alpha)? || self.rejects_left(tau0, tau_hat, alpha)?)
    }

    pub(crate) fn rejects_right(&self, tau0: f64, tau_hat: f64, alpha: f64) -> Result<bool> {
        Ok(tau_hat > self.critical_value(tau0, alpha / 2.0, Direction::Right)? + super::TIE_TOL)
    }

    pub(crate) fn rejects_left(&self, tau0: f64, tau_hat: f64, alpha: f64) -> Result<bool> {
        Ok(tau_hat < self.critical_value(tau0, alpha / 2.0, Direction::Left)? - super::TIE_TOL)
    }
}

/// Rounds a Monte Carlo critical value outward to the grid `−M + k·step` (plus `M`).
fn snap_to_grid(raw: f64, max: f64, direction: Direction) -> f64 {
    let x = (raw + max) / MC_GRID_STEP;
    let v = match direction {
        Direction::Right => -max + (x - 1e-9).ceil() * MC_GRID_STEP,
        Direction::Left => -max + (x + 1e-9).floor() * MC_GRID_STEP,
    };
    v.clamp(-max, max)
}
