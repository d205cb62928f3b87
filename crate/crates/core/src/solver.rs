//! Minimax weight solvers.
//!
//! The one-sided problem minimizes `ḡ(w)` over nonincreasing, nonnegative
//! weights with `Σ w ≤ 1`, with every observation satisfying `C‖R_i‖ ≥ 1/2`
//! pinned at zero. On the remaining coordinates no envelope entry ever clips,
//! so `ḡ` is a convex function whose gradient is the gradient of `g(·; t*)`
//! at the unique maximizing anchor, except on the set where `g(w; ·)` is flat
//! in the anchor. That set is handled by an explicit closed-form candidate.

use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Design, LipschitzBound, WeightProfile};
use crate::projection::project_monotone_capped;
use crate::rng::{stream_rng, streams};
use crate::scalar::{ordered_sum, Real};
use crate::worst_case::{
    argmax_anchor, ate_argmax, ate_gradient, ate_mse_at, ate_worst_case_mse_radii, g_at,
    g_gradient, gbar, AteMode, GbarMode, DEFAULT_ANCHOR_GRID,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    /// Anchor grid used to cross-check the closed-form worst case at the solution.
    pub anchor_grid: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            restarts: 3,
            anchor_grid: DEFAULT_ANCHOR_GRID,
            seed: 0,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Constraint tags reported with a solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ActiveConstraint {
    /// Trailing observations with `C‖R_i‖ ≥ 1/2`, fixed at zero.
    Excluded { count: usize },
    /// `Σ w = 1` binds.
    SumCap,
    /// Coordinates `first..=last` share one value through the monotonicity constraint.
    MonotoneTie { first: usize, last: usize },
    /// Free coordinates from `from` onward are zero.
    ZeroTail { from: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult<T = f64> {
    pub weights: WeightProfile<T>,
    /// Certified objective at `weights`, recomputed from scratch.
    pub value: T,
    pub iterations: usize,
    pub active_constraints: Vec<ActiveConstraint>,
    /// Norm of the projected gradient step at the solution.
    pub stationarity: T,
    pub converged: bool,
}

fn check_sorted<T: Real>(radii: &[T]) -> Result<()> {
    for (i, r) in radii.iter().enumerate() {
        if !r.is_finite() || *r < T::zero() || (i > 0 && *r < radii[i - 1]) {
            return Err(Error::InvalidRadii { index: i });
        }
    }
    Ok(())
}

/// Number of leading observations with `C‖R_i‖ < 1/2`.
pub fn free_count<T: Real>(radii: &[T], c: LipschitzBound<T>) -> usize {
    radii.iter().take_while(|r| c.admits(**r)).count()
}

trait Objective<T: Real> {
    fn value(&self, x: &[T]) -> T;
    fn value_grad(&self, x: &[T], g: &mut [T]) -> T;
    fn project(&self, y: &[T]) -> Vec<T>;
}

struct OneSided<'a, T> {
    radii: &'a [T],
    c: T,
}

impl<T: Real> Objective<T> for OneSided<'_, T> {
    fn value(&self, x: &[T]) -> T {
        let t = argmax_anchor(x, self.radii, self.c);
        g_at(x, self.radii, self.c, t)
    }

    fn value_grad(&self, x: &[T], g: &mut [T]) -> T {
        let t = argmax_anchor(x, self.radii, self.c);
        g_gradient(x, self.radii, self.c, t, g);
        g_at(x, self.radii, self.c, t)
    }

    fn project(&self, y: &[T]) -> Vec<T> {
        project_monotone_capped(y, T::one())
    }
}

struct Joint<'a, T> {
    rp: &'a [T],
    rm: &'a [T],
    c: T,
}

impl<T: Real> Joint<'_, T> {
    fn split<'x>(&self, x: &'x [T]) -> (&'x [T], &'x [T]) {
        x.split_at(self.rp.len())
    }
}

impl<T: Real> Objective<T> for Joint<'_, T> {
    fn value(&self, x: &[T]) -> T {
        let (wp, wm) = self.split(x);
        let (tp, tm) = ate_argmax(wp, self.rp, wm, self.rm, self.c);
        ate_mse_at(wp, self.rp, wm, self.rm, self.c, tp, tm)
    }

    fn value_grad(&self, x: &[T], g: &mut [T]) -> T {
        let (wp, wm) = self.split(x);
        let (tp, tm) = ate_argmax(wp, self.rp, wm, self.rm, self.c);
        let (gp, gm) = g.split_at_mut(self.rp.len());
        ate_gradient(wp, self.rp, wm, self.rm, self.c, tp, tm, gp, gm);
        ate_mse_at(wp, self.rp, wm, self.rm, self.c, tp, tm)
    }

    fn project(&self, y: &[T]) -> Vec<T> {
        let (a, b) = y.split_at(self.rp.len());
        let mut out = project_monotone_capped(a, T::one());
        out.extend(project_monotone_capped(b, T::one()));
        out
    }
}

/// Joint objective restricted to `w₊ = w₋` (identical radii on both sides).
struct Symmetric<'a, T> {
    radii: &'a [T],
    c: T,
}

impl<T: Real> Objective<T> for Symmetric<'_, T> {
    fn value(&self, x: &[T]) -> T {
        let (tp, tm) = ate_argmax(x, self.radii, x, self.radii, self.c);
        ate_mse_at(x, self.radii, x, self.radii, self.c, tp, tm)
    }

    fn value_grad(&self, x: &[T], g: &mut [T]) -> T {
        let (tp, tm) = ate_argmax(x, self.radii, x, self.radii, self.c);
        let mut gm = vec![T::zero(); x.len()];
        ate_gradient(x, self.radii, x, self.radii, self.c, tp, tm, g, &mut gm);
        for (a, b) in g.iter_mut().zip(&gm) {
            *a = *a + *b;
        }
        ate_mse_at(x, self.radii, x, self.radii, self.c, tp, tm)
    }

    fn project(&self, y: &[T]) -> Vec<T> {
        project_monotone_capped(y, T::one())
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    ordered_sum(a.iter().zip(b).map(|(x, y)| *x * *y))
}

fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    ordered_sum(a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y))).sqrt()
}

fn projected_step_norm<T: Real>(obj: &impl Objective<T>, x: &[T], g: &[T]) -> T {
    let y: Vec<T> = x.iter().zip(g).map(|(a, b)| *a - *b).collect();
    dist(&obj.project(&y), x)
}

const STALL_LIMIT: usize = 50;

/// Projected gradient steps accepted on decrease of the stationarity measure,
/// for use once objective differences are below floating-point resolution.
fn gradient_polish<T: Real>(obj: &impl Objective<T>, x: Vec<T>, tol: T) -> Vec<T> {
    let n = x.len();
    let mut x = x;
    let mut g = vec![T::zero(); n];
    let mut f = obj.value_grad(&x, &mut g);
    let mut stat = projected_step_norm(obj, &x, &g);
    let mut lip = T::one();
    let slack = T::lit(4.0) * T::epsilon();
    for _ in 0..200 {
        if stat <= tol * (T::one() + f.abs()) * T::lit(1e-2) {
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let step: Vec<T> = x.iter().zip(&g).map(|(a, b)| *a - *b / lip).collect();
            let z = obj.project(&step);
            let mut gz = vec![T::zero(); n];
            let fz = obj.value_grad(&z, &mut gz);
            let sz = projected_step_norm(obj, &z, &gz);
            if sz < stat && fz <= f + slack * (T::one() + f.abs()) {
                (x, g, f, stat) = (z, gz, fz, sz);
                lip = lip * T::half();
                improved = true;
                break;
            }
            lip = lip * T::lit(2.0);
        }
        if !improved {
            break;
        }
    }
    x
}

struct Descent<T> {
    x: Vec<T>,
    iterations: usize,
    stationarity: T,
}

/// Monotone accelerated projected gradient with backtracking.
fn fista<T: Real>(obj: &impl Objective<T>, x0: &[T], tol: T, max_iter: usize) -> Descent<T> {
    let n = x0.len();
    let mut x = obj.project(x0);
    if n == 0 {
        return Descent {
            x,
            iterations: 0,
            stationarity: T::zero(),
        };
    }
    let mut gx = vec![T::zero(); n];
    let mut fx = obj.value_grad(&x, &mut gx);
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut fy = fx;
    let mut tk = T::one();
    let mut lip = T::one();
    let lip_max = T::lit(1e18);
    let mut stationarity = projected_step_norm(obj, &x, &gx);
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < max_iter {
        if stationarity <= tol * (T::one() + fx.abs()) {
            break;
        }
        iterations += 1;
        let z = loop {
            let step: Vec<T> = y.iter().zip(&gy).map(|(a, b)| *a - *b / lip).collect();
            let z = obj.project(&step);
            let fz = obj.value(&z);
            let d: Vec<T> = z.iter().zip(&y).map(|(a, b)| *a - *b).collect();
            let model = fy + dot(&gy, &d) + lip * T::half() * dot(&d, &d);
            if fz <= model + T::lit(1e-15) * (T::one() + fy.abs()) || lip >= lip_max {
                break z;
            }
            lip = lip * T::lit(2.0);
        };
        let mut gz = vec![T::zero(); n];
        let fz = obj.value_grad(&z, &mut gz);
        let t_next = (T::one() + (T::one() + T::lit(4.0) * tk * tk).sqrt()) * T::half();
        if fz < fx {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        }
        if fz <= fx {
            let x_prev = std::mem::replace(&mut x, z);
            fx = fz;
            gx = gz;
            let beta = (tk - T::one()) / t_next;
            y = x
                .iter()
                .zip(&x_prev)
                .map(|(a, b)| *a + beta * (*a - *b))
                .collect();
            tk = t_next;
        } else {
            // Objective went up: drop momentum and restart from the best point.
            y = x.clone();
            tk = T::one();
        }
        if y == x {
            gy = gx.clone();
            fy = fx;
        } else {
            y = obj.project(&y);
            fy = obj.value_grad(&y, &mut gy);
        }
        lip = (lip * T::lit(0.9)).max(T::lit(1e-6));
        stationarity = projected_step_norm(obj, &x, &gx);
    }
    Descent {
        x,
        iterations,
        stationarity,
    }
}

fn jitter_start<T: Real>(m: usize, seed: u64, index: u64) -> Vec<T> {
    let mut rng = stream_rng(seed, streams::SOLVER_JITTER, index);
    let mut v: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().ln()).collect();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite draws"));
    let mass = 0.3 + 0.65 * rng.random::<f64>();
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| T::lit(x / total * mass)).collect()
}

fn uniform_start<T: Real>(m: usize) -> Vec<T> {
    if m == 0 {
        return Vec::new();
    }
    let s = (m as f64).sqrt();
    vec![T::lit(s / (1.0 + s) / m as f64); m]
}

fn tent_start<T: Real>(radii: &[T], c: T) -> Vec<T> {
    let raw: Vec<T> = radii.iter().map(|r| T::half() - c * *r).collect();
    let total = ordered_sum(raw.iter().copied());
    if total <= T::zero() {
        return vec![T::zero(); radii.len()];
    }
    raw.into_iter().map(|v| v / total * T::lit(0.8)).collect()
}

/// Shared-value candidate on the `C‖R_i‖ = 0` points, where `g(w; ·)` is flat.
fn flat_candidate<T: Real>(radii: &[T], c: T, m: usize) -> Option<Vec<T>> {
    let m0 = radii[..m]
        .iter()
        .take_while(|r| c * **r == T::zero())
        .count();
    if m0 == 0 {
        return None;
    }
    let s = (m0 as f64).sqrt();
    let mut w = vec![T::zero(); m];
    for v in w.iter_mut().take(m0) {
        *v = T::lit(s / (1.0 + s) / m0 as f64);
    }
    Some(w)
}

/// Lexicographic comparison used to break exact ties between candidates.
fn lex_less<T: Real>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn active_constraints<T: Real>(w: &[T], m: usize, n: usize) -> Vec<ActiveConstraint> {
    let mut out = Vec::new();
    if n > m {
        out.push(ActiveConstraint::Excluded { count: n - m });
    }
    let free = &w[..m];
    if m > 0 && (ordered_sum(free.iter().copied()) - T::one()).abs() <= T::lit(1e-10) {
        out.push(ActiveConstraint::SumCap);
    }
    let zero_from = free.iter().position(|v| *v == T::zero()).unwrap_or(m);
    let mut i = 0;
    while i < zero_from {
        let mut j = i;
        while j + 1 < zero_from && free[j + 1] == free[i] {
            j += 1;
        }
        if j > i {
            out.push(ActiveConstraint::MonotoneTie { first: i, last: j });
        }
        i = j + 1;
    }
    if zero_from < m {
        out.push(ActiveConstraint::ZeroTail { from: zero_from });
    }
    out
}

/// Hessian of `ḡ` on the free coordinates at a point with a unique maximizing anchor.
fn one_sided_hessian<T: Real>(w: &[T], radii: &[T], c: T) -> Vec<Vec<T>> {
    let m = w.len();
    let two = T::lit(2.0);
    let t = argmax_anchor(w, radii, c);
    let theta: Vec<T> = radii.iter().map(|r| (t + c * *r).min(T::half())).collect();
    let mut h = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        for j in 0..m {
            h[i][j] = two * theta[i] * theta[j];
        }
        h[i][i] = h[i][i] + two * (T::quarter() - theta[i] * theta[i]);
    }
    let interior = t > -T::half() && t < T::zero();
    if interior {
        let u = ordered_sum(w.iter().copied());
        let s2 = ordered_sum(w.iter().map(|x| *x * *x));
        let a = (T::one() - u) * (T::one() - u) - s2;
        if a < T::zero() {
            let b = ordered_sum(w.iter().zip(&theta).map(|(x, y)| *x * *y)) - t;
            let q: Vec<T> = (0..m)
                .map(|j| two * theta[j] * (u - T::one()) + two * b - T::lit(4.0) * w[j] * theta[j])
                .collect();
            for i in 0..m {
                for j in 0..m {
                    h[i][j] = h[i][j] - q[i] * q[j] / (two * a);
                }
            }
        }
    }
    h
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|x, y| {
            a[*x][col]
                .abs()
                .partial_cmp(&a[*y][col].abs())
                .expect("finite")
        })?;
        if a[piv][col].abs() <= T::lit(1e-300) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != T::zero() {
                for k in col..n {
                    a[row][k] = a[row][k] - f * a[col][k];
                }
                b[row] = b[row] - f * b[col];
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s = s - a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Newton refinement on the face (tie blocks, zero tail, sum cap) that the
/// first-order method identified. Function values are at rounding level by
/// then, so progress is judged by the projected gradient instead.
fn polish_one_sided<T: Real>(x: Vec<T>, radii: &[T], c: T, tol: T) -> Vec<T> {
    let obj = OneSided { radii, c };
    let m = x.len();
    let mut x = x;
    let mut g = vec![T::zero(); m];
    let mut fx = obj.value_grad(&x, &mut g);
    let mut stat = projected_step_norm(&obj, &x, &g);
    for _ in 0..30 {
        if stat <= tol * (T::one() + fx) * T::lit(1e-2) {
            break;
        }
        let z = x.iter().position(|v| *v == T::zero()).unwrap_or(m);
        if z == 0 {
            break;
        }
        let mut blocks: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < z {
            let mut j = i;
            while j + 1 < z && x[j + 1] == x[i] {
                j += 1;
            }
            blocks.push((i, j + 1));
            i = j + 1;
        }
        let nb = blocks.len();
        let capped = (ordered_sum(x.iter().copied()) - T::one()).abs() <= T::lit(1e-12);
        let h = one_sided_hessian(&x, radii, c);
        let dim = nb + usize::from(capped);
        let mut a = vec![vec![T::zero(); dim]; dim];
        let mut rhs = vec![T::zero(); dim];
        for (p, &(p0, p1)) in blocks.iter().enumerate() {
            rhs[p] = -ordered_sum(g[p0..p1].iter().copied());
            for (q, &(q0, q1)) in blocks.iter().enumerate() {
                let mut s = T::zero();
                for row in &h[p0..p1] {
                    s = s + ordered_sum(row[q0..q1].iter().copied());
                }
                a[p][q] = s;
            }
            if capped {
                let size = T::lit((p1 - p0) as f64);
                a[p][nb] = size;
                a[nb][p] = size;
            }
        }
        let Some(d) = solve_dense(a, rhs) else { break };
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..20 {
            let mut y = x.clone();
            for (p, &(p0, p1)) in blocks.iter().enumerate() {
                for v in &mut y[p0..p1] {
                    *v = *v + step * d[p];
                }
            }
            let ordered = blocks.windows(2).all(|b| y[b[0].0] > y[b[1].0]) && y[z - 1] > T::zero();
            if ordered && ordered_sum(y.iter().copied()) <= T::one() {
                let y = obj.project(&y);
                let mut gy = vec![T::zero(); m];
                let fy = obj.value_grad(&y, &mut gy);
                let sy = projected_step_norm(&obj, &y, &gy);
                if sy < stat && fy <= fx + T::lit(1e-14) * (T::one() + fx) {
                    x = y;
                    g = gy;
                    fx = fy;
                    stat = sy;
                    accepted = true;
                    break;
                }
            }
            step = step * T::half();
        }
        if !accepted {
            break;
        }
    }
    x
}

/// Smallest projected step over convex combinations of gradients at the
/// anchors that attain the maximum; coincides with the usual measure when the
/// maximizer is unique.
fn one_sided_stationarity<T: Real>(w: &[T], radii: &[T], c: T, value: T) -> T {
    let obj = OneSided { radii, c };
    let m = w.len();
    let t_star = argmax_anchor(w, radii, c);
    let band = T::lit(1e-12) * (T::one() + value.abs());
    let mut anchors = vec![t_star];
    for t in [-T::half(), T::zero()] {
        if t != t_star && value - g_at(w, radii, c, t) <= band {
            anchors.push(t);
        }
    }
    let grads: Vec<Vec<T>> = anchors
        .iter()
        .map(|t| {
            let mut g = vec![T::zero(); m];
            g_gradient(w, radii, c, *t, &mut g);
            g
        })
        .collect();
    let mut best = projected_step_norm(&obj, w, &grads[0]);
    for a in 0..grads.len() {
        for b in a + 1..grads.len() {
            for k in 0..=200 {
                let l = T::lit(k as f64 / 200.0);
                let g: Vec<T> = grads[a]
                    .iter()
                    .zip(&grads[b])
                    .map(|(x, y)| l * *x + (T::one() - l) * *y)
                    .collect();
                best = best.min(projected_step_norm(&obj, w, &g));
            }
        }
    }
    best
}

/// Minimax shrinkage weights for one side.
pub fn solve_minimax_weights<T: Real>(
    radii: &[T],
    c: LipschitzBound<T>,
    opts: &SolverOptions,
) -> Result<SolveResult<T>> {
    solve_minimax_weights_with_starts(radii, c, opts, &[])
}

/// As [`solve_minimax_weights`], seeding the search with extra full-length starting profiles.
pub fn solve_minimax_weights_with_starts<T: Real>(
    radii: &[T],
    c: LipschitzBound<T>,
    opts: &SolverOptions,
    extra_starts: &[Vec<T>],
) -> Result<SolveResult<T>> {
    opts.validate()?;
    check_sorted(radii)?;
    let n = radii.len();
    let m = free_count(radii, c);
    let cv = c.value();
    let free_r = &radii[..m];
    let obj = OneSided {
        radii: free_r,
        c: cv,
    };
    let tol = T::lit(opts.tol);

    let mut starts: Vec<Vec<T>> = vec![uniform_start(m), tent_start(free_r, cv)];
    for s in extra_starts {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: s.len(),
            });
        }
        starts.push(s[..m].to_vec());
    }
    starts.extend((0..opts.restarts as u64).map(|k| jitter_start(m, opts.seed, k)));

    let mut candidates: Vec<(Vec<T>, usize, T)> = Vec::new();
    if let Some(w) = flat_candidate(free_r, cv, m) {
        candidates.push((w, 0, T::zero()));
    }
    for s in &starts {
        let d = fista(&obj, s, tol, opts.max_iter);
        let x = polish_one_sided(d.x, free_r, cv, tol);
        candidates.push((x, d.iterations, d.stationarity));
    }

    let mut best: Option<(Vec<T>, T, usize)> = None;
    let mut total_iter = 0;
    for (free_w, iters, _) in candidates {
        total_iter += iters;
        let mut full = free_w;
        full.resize(n, T::zero());
        let value = gbar(
            &WeightProfile::from_vec_unchecked(full.clone()),
            c,
            radii,
            GbarMode::ClosedForm,
        )?
        .value;
        let better = match &best {
            None => true,
            Some((bw, bv, _)) => value < *bv || (value == *bv && lex_less(&full, bw)),
        };
        if better {
            best = Some((full, value, iters));
        }
    }
    let (w, value, _) = best.expect("at least one candidate");

    if opts.anchor_grid >= 2 {
        let grid = gbar(
            &WeightProfile::from_vec_unchecked(w.clone()),
            c,
            radii,
            GbarMode::Grid(opts.anchor_grid),
        )?;
        if grid.value > value + T::lit(1e-12) * (T::one() + value) {
            return Err(Error::Numerical(format!(
                "closed-form worst case {value} is below the grid value {}",
                grid.value
            )));
        }
    }

    let stationarity = if m == 0 {
        T::zero()
    } else {
        one_sided_stationarity(&w[..m], free_r, cv, value)
    };
    Ok(SolveResult {
        active_constraints: active_constraints(&w, m, n),
        weights: WeightProfile::from_vec_unchecked(w),
        value,
        iterations: total_iter,
        stationarity,
        converged: stationarity <= tol * (T::one() + value.abs()),
    })
}

fn check_gauss_inputs<T: Real>(radii: &[T], sigma2: &[T]) -> Result<()> {
    let n = radii.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if sigma2.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: sigma2.len(),
        });
    }
    if let Some(index) = sigma2
        .iter()
        .position(|s| !(*s > T::zero()) || !s.is_finite())
    {
        return Err(Error::NegativeVariance { index });
    }
    if let Some(index) = radii.iter().position(|r| !r.is_finite() || *r < T::zero()) {
        return Err(Error::InvalidRadii { index });
    }
    Ok(())
}

/// Simplex weights `max(0, ν − 2C²s‖R_i‖)/(2σ_i²)` with `ν` fixed by `Σ w = 1`.
fn gauss_side_weights<T: Real>(radii: &[T], sigma2: &[T], c2: T, s: T) -> Vec<T> {
    let n = radii.len();
    let two = T::lit(2.0);
    let d: Vec<T> = radii.iter().map(|r| two * c2 * s * *r).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| d[*a].partial_cmp(&d[*b]).expect("finite"));
    // Σ_{i active} (ν − d_i)/(2σ_i²) = 1 with active = the k smallest d_i.
    let (mut a, mut b) = (T::zero(), T::zero());
    let mut nu = T::zero();
    let mut active = n;
    for (k, &i) in order.iter().enumerate() {
        let inv = T::one() / (two * sigma2[i]);
        a = a + inv;
        b = b + d[i] * inv;
        let cand = (T::one() + b) / a;
        let next = order.get(k + 1).map(|j| d[*j]).unwrap_or(T::infinity());
        nu = cand;
        if cand <= next {
            active = k + 1;
            break;
        }
    }
    let mut w = vec![T::zero(); n];
    for &i in &order[..active] {
        w[i] = (nu - d[i]).max(T::zero()) / (two * sigma2[i]);
    }
    let total = ordered_sum(w.iter().copied());
    w.into_iter().map(|v| v / total).collect()
}

/// Solves `min C²(Σ_sides Σ w‖R‖)² + Σ_sides Σ w²σ²` with one simplex per side.
///
/// For a trial total moment `s` every side's KKT weights follow in closed
/// form; the realized moment is nonincreasing in `s`, so the fixed point is
/// found by bisection.
fn gauss_kkt<T: Real>(sides: &[(&[T], &[T])], c2: T) -> Vec<Vec<T>> {
    let solve = |s: T| -> Vec<Vec<T>> {
        sides
            .iter()
            .map(|(r, v)| gauss_side_weights(r, v, c2, s))
            .collect()
    };
    let moment = |ws: &[Vec<T>]| -> T {
        ordered_sum(
            ws.iter()
                .zip(sides)
                .map(|(w, (r, _))| ordered_sum(w.iter().zip(r.iter()).map(|(a, b)| *a * *b))),
        )
    };
    if c2 == T::zero() {
        return solve(T::zero());
    }
    let mut lo = T::zero();
    let mut hi = ordered_sum(
        sides
            .iter()
            .map(|(r, _)| r.iter().copied().fold(T::zero(), T::max)),
    );
    for _ in 0..200 {
        let mid = (lo + hi) * T::half();
        if mid == lo || mid == hi {
            break;
        }
        if moment(&solve(mid)) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve((lo + hi) * T::half())
}

/// Largest KKT violation of one side given the shared moment `k`.
fn gauss_side_stationarity<T: Real>(w: &[T], radii: &[T], sigma2: &[T], c2: T, k: T) -> T {
    let two = T::lit(2.0);
    let grad: Vec<T> = w
        .iter()
        .zip(sigma2)
        .zip(radii)
        .map(|((wi, s), r)| two * c2 * k * *r + two * *wi * *s)
        .collect();
    let support: Vec<usize> = (0..w.len()).filter(|i| w[*i] > T::zero()).collect();
    let nu = ordered_sum(support.iter().map(|i| grad[*i])) / T::lit(support.len() as f64);
    (0..w.len())
        .map(|i| {
            if w[i] > T::zero() {
                (grad[i] - nu).abs()
            } else {
                (nu - grad[i]).max(T::zero())
            }
        })
        .fold(T::zero(), T::max)
}

fn gauss_result<T: Real>(w: Vec<T>, value: T, stationarity: T) -> SolveResult<T> {
    let mut active = vec![ActiveConstraint::SumCap];
    if let Some(from) = w.iter().position(|v| *v == T::zero()) {
        active.push(ActiveConstraint::ZeroTail { from });
    }
    SolveResult {
        weights: WeightProfile::from_vec_unchecked(w),
        value,
        iterations: 0,
        active_constraints: active,
        stationarity,
        converged: stationarity <= T::lit(1e-8),
    }
}

/// Minimax weights of the Gaussian model: `min C²(Σ w_i‖R_i‖)² + Σ w_i² σ_i²`
/// over the probability simplex.
///
/// The KKT conditions give `w_i = max(0, ν − 2C² s ‖R_i‖) / (2σ_i²)` with
/// `s = Σ w_i ‖R_i‖`; `ν` is fixed by `Σ w = 1` and `s` by bisection on the
/// (strictly monotone) fixed-point equation.
pub fn solve_gaussian_weights<T: Real>(
    radii: &[T],
    c: LipschitzBound<T>,
    sigma2: &[T],
) -> Result<SolveResult<T>> {
    check_gauss_inputs(radii, sigma2)?;
    let c2 = c.value() * c.value();
    let w = if radii.len() == 1 {
        vec![T::one()]
    } else {
        gauss_kkt(&[(radii, sigma2)], c2).remove(0)
    };
    let k = ordered_sum(w.iter().zip(radii).map(|(a, b)| *a * *b));
    let value = c2 * k * k + ordered_sum(w.iter().zip(sigma2).map(|(a, s)| *a * *a * *s));
    let stationarity = gauss_side_stationarity(&w, radii, sigma2, c2, k);
    Ok(gauss_result(w, value, stationarity))
}

/// Gaussian-model weights for the difference estimator: both sides share the
/// bias term `C(Σw₊‖R₊‖ + Σw₋‖R₋‖)`. The reported value is the joint objective.
pub fn solve_gaussian_ate_weights<T: Real>(
    radii_plus: &[T],
    radii_minus: &[T],
    c: LipschitzBound<T>,
    sigma2_plus: &[T],
    sigma2_minus: &[T],
) -> Result<(SolveResult<T>, SolveResult<T>)> {
    check_gauss_inputs(radii_plus, sigma2_plus)?;
    check_gauss_inputs(radii_minus, sigma2_minus)?;
    let c2 = c.value() * c.value();
    let mut ws = gauss_kkt(
        &[(radii_plus, sigma2_plus), (radii_minus, sigma2_minus)],
        c2,
    );
    let wm = ws.pop().expect("two sides");
    let wp = ws.pop().expect("two sides");
    let mom = |w: &[T], r: &[T]| ordered_sum(w.iter().zip(r).map(|(a, b)| *a * *b));
    let k = mom(&wp, radii_plus) + mom(&wm, radii_minus);
    let var = |w: &[T], s: &[T]| ordered_sum(w.iter().zip(s).map(|(a, b)| *a * *a * *b));
    let value = c2 * k * k + var(&wp, sigma2_plus) + var(&wm, sigma2_minus);
    let sp = gauss_side_stationarity(&wp, radii_plus, sigma2_plus, c2, k);
    let sm = gauss_side_stationarity(&wm, radii_minus, sigma2_minus, c2, k);
    Ok((gauss_result(wp, value, sp), gauss_result(wm, value, sm)))
}

/// Joint minimax weights for the difference estimator.
pub fn solve_ate_weights<T: Real>(
    design: &Design<T>,
    c: LipschitzBound<T>,
    opts: &SolverOptions,
) -> Result<(SolveResult<T>, SolveResult<T>)> {
    solve_ate_weights_radii(design.treated.radii(), design.control.radii(), c, opts)
}

pub fn solve_ate_weights_radii<T: Real>(
    radii_plus: &[T],
    radii_minus: &[T],
    c: LipschitzBound<T>,
    opts: &SolverOptions,
) -> Result<(SolveResult<T>, SolveResult<T>)> {
    opts.validate()?;
    check_sorted(radii_plus)?;
    check_sorted(radii_minus)?;
    let cv = c.value();
    let tol = T::lit(opts.tol);
    let (np, nm) = (radii_plus.len(), radii_minus.len());
    let (mp, mm) = (free_count(radii_plus, c), free_count(radii_minus, c));
    let (rp, rm) = (&radii_plus[..mp], &radii_minus[..mm]);

    let mut candidates: Vec<(Vec<T>, Vec<T>, usize)> = Vec::new();
    if rp == rm {
        // Equal radii: search over mirrored solutions.
        let obj = Symmetric { radii: rp, c: cv };
        let mut starts = vec![uniform_start(mp), tent_start(rp, cv)];
        let one = solve_minimax_weights(radii_plus, c, opts)?;
        starts.push(one.weights.as_slice()[..mp].to_vec());
        starts.extend((0..opts.restarts as u64).map(|k| jitter_start(mp, opts.seed, k)));
        if let Some(w) = flat_candidate(rp, cv, mp) {
            starts.push(w);
        }
        for s in &starts {
            let d = fista(&obj, s, tol, opts.max_iter);
            candidates.push((d.x.clone(), d.x, d.iterations));
        }
    } else {
        let obj = Joint { rp, rm, c: cv };
        let plus = solve_minimax_weights(radii_plus, c, opts)?;
        let minus = solve_minimax_weights(radii_minus, c, opts)?;
        let mut starts: Vec<Vec<T>> = Vec::new();
        let mut plug = plus.weights.as_slice()[..mp].to_vec();
        plug.extend_from_slice(&minus.weights.as_slice()[..mm]);
        starts.push(plug);
        let mut uni: Vec<T> = uniform_start(mp);
        uni.extend(uniform_start::<T>(mm));
        starts.push(uni);
        for k in 0..opts.restarts as u64 {
            let mut s: Vec<T> = jitter_start(mp, opts.seed, 2 * k);
            s.extend(jitter_start::<T>(mm, opts.seed, 2 * k + 1));
            starts.push(s);
        }
        for s in &starts {
            let d = fista(&obj, s, tol, opts.max_iter);
            let (a, b) = d.x.split_at(mp);
            candidates.push((a.to_vec(), b.to_vec(), d.iterations));
        }
    }

    let mut best: Option<(Vec<T>, Vec<T>, T)> = None;
    let mut total_iter = 0;
    for (mut a, mut b, iters) in candidates {
        total_iter += iters;
        a.resize(np, T::zero());
        b.resize(nm, T::zero());
        let value = ate_worst_case_mse_radii(
            &WeightProfile::from_vec_unchecked(a.clone()),
            radii_plus,
            &WeightProfile::from_vec_unchecked(b.clone()),
            radii_minus,
            c,
            AteMode::Exact,
        )?
        .value;
        let better = match &best {
            None => true,
            Some((ba, bb, bv)) => {
                value < *bv
                    || (value == *bv && (lex_less(&a, ba) || (a == *ba && lex_less(&b, bb))))
            }
        };
        if better {
            best = Some((a, b, value));
        }
    }
    let (a, b, value) = best.expect("at least one candidate");

    let joint = Joint { rp, rm, c: cv };
    let mut x = a[..mp].to_vec();
    x.extend_from_slice(&b[..mm]);
    let (mut a, mut b, mut value) = (a, b, value);
    if !x.is_empty() {
        let polished = gradient_polish(&joint, x.clone(), tol);
        let (pa, pb) = polished.split_at(mp);
        let (mut pa, mut pb) = (pa.to_vec(), pb.to_vec());
        pa.resize(np, T::zero());
        pb.resize(nm, T::zero());
        let pv = ate_worst_case_mse_radii(
            &WeightProfile::from_vec_unchecked(pa.clone()),
            radii_plus,
            &WeightProfile::from_vec_unchecked(pb.clone()),
            radii_minus,
            c,
            AteMode::Exact,
        )?
        .value;
        if pv <= value + T::lit(4.0) * T::epsilon() * (T::one() + value) {
            (a, b, value, x) = (pa, pb, pv, polished);
        }
    }
    let mut g = vec![T::zero(); x.len()];
    joint.value_grad(&x, &mut g);
    let stationarity = if x.is_empty() {
        T::zero()
    } else {
        projected_step_norm(&joint, &x, &g)
    };
    let converged = stationarity <= tol * (T::one() + value.abs());
    let make = |w: Vec<T>, m: usize, n: usize| SolveResult {
        active_constraints: active_constraints(&w, m, n),
        weights: WeightProfile::from_vec_unchecked(w),
        value,
        iterations: total_iter,
        stationarity,
        converged,
    };
    Ok((make(a, mp, np), make(b, mm, nm)))
}
