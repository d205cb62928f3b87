//! Worst-case mean squared error of a fixed weight profile.
//!
//! Over the Lipschitz class the maximum MSE is attained on the envelope family
//! `θ̃(t)`, indexed by the boundary mean `t ∈ [−1/2, 0]`. Along that family the
//! objective is a piecewise quadratic in `t` whose pieces change only where a
//! positively weighted observation hits the upper clip `1/2`, so the maximum is
//! available exactly. The joint treated/control objective is the analogous
//! piecewise quadratic in two anchors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LipschitzBound, MeanProfile, Scale, WeightProfile};
use crate::scalar::{ordered_sum, Real};

/// Default number of anchors for the one-sided grid evaluator.
pub const DEFAULT_ANCHOR_GRID: usize = 1001;
/// Default per-axis grid size for the joint treated/control evaluator.
pub const DEFAULT_ATE_GRID: usize = 101;

const BRUTE_MAX_N: usize = 4;
const FLAT_CURVATURE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstCaseMethod {
    ClosedForm,
    Grid,
    Brute,
}

/// Maximizing boundary mean(s) in the centered scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Anchor<T> {
    Single(T),
    /// `(θ₀₊, θ₀₋)` with `θ₀₊ ∈ [−1/2, 0]` and `θ₀₋ ∈ [0, 1/2]`.
    Pair(T, T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseReport<T = f64> {
    pub value: T,
    pub argmax_anchor: Anchor<T>,
    pub method: WorstCaseMethod,
}

/// Evaluator for the one-sided worst case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GbarMode {
    #[default]
    ClosedForm,
    /// Maximum over this many equally spaced anchors on `[−1/2, 0]`.
    Grid(usize),
}

/// Evaluator for the joint treated/control worst case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AteMode {
    /// Exact maximum of the piecewise quadratic over the anchor rectangle.
    #[default]
    Exact,
    /// `m × m` anchor grid, optionally followed by one golden-section pass per
    /// coordinate around the grid argmax.
    Grid { m: usize, refine: bool },
}

impl AteMode {
    pub fn grid_default() -> Self {
        AteMode::Grid {
            m: DEFAULT_ATE_GRID,
            refine: true,
        }
    }
}

fn check_anchor<T: Real>(t: T) -> Result<()> {
    if !(t >= -T::half() && t <= T::half()) {
        return Err(Error::AnchorOutOfRange {
            value: t.as_f64(),
            lo: -0.5,
            hi: 0.5,
        });
    }
    Ok(())
}

/// `(t, min{t + C‖R_1‖, 1/2}, …)`.
pub fn envelope_theta<T: Real>(t: T, c: LipschitzBound<T>, radii: &[T]) -> Result<MeanProfile<T>> {
    check_anchor(t)?;
    let mut values = Vec::with_capacity(radii.len() + 1);
    values.push(t);
    values.extend(radii.iter().map(|r| (t + c.value() * *r).min(T::half())));
    Ok(MeanProfile::from_vec_unchecked(values, Scale::Theta))
}

fn theta_values<T: Real>(theta: &MeanProfile<T>, n: usize) -> Result<Vec<T>> {
    if theta.len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            found: theta.len(),
        });
    }
    Ok(theta.to_theta().values().to_vec())
}

/// `(Σ w_i θ_i − θ₀)² + Σ w_i² (1/4 − θ_i²)`.
pub fn mse_binary<T: Real>(w: &WeightProfile<T>, theta: &MeanProfile<T>) -> Result<T> {
    let th = theta_values(theta, w.len())?;
    let ws = w.as_slice();
    let bias = ordered_sum(ws.iter().zip(&th[1..]).map(|(w, t)| *w * *t)) - th[0];
    let var = ordered_sum(
        ws.iter()
            .zip(&th[1..])
            .map(|(w, t)| *w * *w * (T::quarter() - *t * *t)),
    );
    Ok(bias * bias + var)
}

/// `(Σ w_i θ_i − θ₀)² + Σ w_i² σ_i²`.
pub fn mse_gauss<T: Real>(w: &WeightProfile<T>, theta: &MeanProfile<T>, sigma2: &[T]) -> Result<T> {
    let th = theta_values(theta, w.len())?;
    if sigma2.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            found: sigma2.len(),
        });
    }
    if let Some(index) = sigma2.iter().position(|s| !(*s >= T::zero())) {
        return Err(Error::NegativeVariance { index });
    }
    let ws = w.as_slice();
    let bias = ordered_sum(ws.iter().zip(&th[1..]).map(|(w, t)| *w * *t)) - th[0];
    let var = ordered_sum(ws.iter().zip(sigma2).map(|(w, s)| *w * *w * *s));
    Ok(bias * bias + var)
}

/// Bias and variance of one side along the upper envelope anchored at `t`.
#[inline]
pub(crate) fn side_bias_var<T: Real>(w: &[T], radii: &[T], c: T, t: T) -> (T, T) {
    let mut s = T::zero();
    let mut v = T::zero();
    for (wi, ri) in w.iter().zip(radii) {
        if *wi == T::zero() {
            continue;
        }
        let th = (t + c * *ri).min(T::half());
        s = s + *wi * th;
        v = v + *wi * *wi * (T::quarter() - th * th);
    }
    (s - t, v)
}

/// `g(w; t)`: binary MSE at the envelope anchored at `t`.
#[inline]
pub(crate) fn g_at<T: Real>(w: &[T], radii: &[T], c: T, t: T) -> T {
    let (b, v) = side_bias_var(w, radii, c, t);
    b * b + v
}

/// Gradient of `g(·; t)` with respect to the weights.
pub(crate) fn g_gradient<T: Real>(w: &[T], radii: &[T], c: T, t: T, out: &mut [T]) {
    let (b, _) = side_bias_var(w, radii, c, t);
    let two = T::lit(2.0);
    for ((o, wi), ri) in out.iter_mut().zip(w).zip(radii) {
        let th = (t + c * *ri).min(T::half());
        *o = two * b * th + two * *wi * (T::quarter() - th * th);
    }
}

/// One quadratic piece: bias `slope·t + icpt`, variance `vq·t² + vl·t + vc`.
#[derive(Debug, Clone, Copy)]
struct Piece<T> {
    lo: T,
    hi: T,
    slope: T,
    icpt: T,
    vq: T,
    vl: T,
    vc: T,
}

impl<T: Real> Piece<T> {
    fn quadratic(&self) -> (T, T, T) {
        let two = T::lit(2.0);
        (
            self.slope * self.slope + self.vq,
            two * self.slope * self.icpt + self.vl,
            self.icpt * self.icpt + self.vc,
        )
    }
}

/// Splits `[−1/2, 0]` where positively weighted points start clipping.
fn side_pieces<T: Real>(w: &[T], radii: &[T], c: T) -> Vec<Piece<T>> {
    let half = T::half();
    let mut edges: Vec<T> = w
        .iter()
        .zip(radii)
        .filter(|(wi, _)| **wi > T::zero())
        .map(|(_, ri)| half - c * *ri)
        .filter(|b| *b > -half && *b < T::zero())
        .collect();
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    edges.dedup();
    edges.insert(0, -half);
    edges.push(T::zero());

    let u = ordered_sum(w.iter().copied());
    edges
        .windows(2)
        .map(|e| {
            let (lo, hi) = (e[0], e[1]);
            let mid = (lo + hi) * half;
            let (mut a, mut m1, mut s2, mut s2r, mut s2r2) =
                (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
            for (wi, ri) in w.iter().zip(radii) {
                if *wi == T::zero() || c * *ri >= half - mid {
                    continue;
                }
                let ww = *wi * *wi;
                a = a + *wi;
                m1 = m1 + *wi * *ri;
                s2 = s2 + ww;
                s2r = s2r + ww * *ri;
                s2r2 = s2r2 + ww * *ri * *ri;
            }
            Piece {
                lo,
                hi,
                slope: a - T::one(),
                icpt: c * m1 + half * (u - a),
                vq: -s2,
                vl: -T::lit(2.0) * c * s2r,
                vc: T::quarter() * s2 - c * c * s2r2,
            }
        })
        .collect()
}

/// Exact maximizer of `g(w; ·)` over `[−1/2, 0]`.
///
/// On every piece the candidates are the endpoints and, for strictly concave
/// pieces, the vertex. Without clipping this is the classical rule: the
/// maximum sits at `−1/2` unless the quadratic is concave with vertex inside.
pub(crate) fn argmax_anchor<T: Real>(w: &[T], radii: &[T], c: T) -> T {
    let flat = T::lit(FLAT_CURVATURE);
    let mut best_t = -T::half();
    let mut best = T::neg_infinity();
    for p in side_pieces(w, radii, c) {
        let (a, b, k) = p.quadratic();
        let f = |t: T| (a * t + b) * t + k;
        let mut consider = |t: T| {
            let v = f(t);
            if v > best {
                best = v;
                best_t = t;
            }
        };
        consider(p.lo);
        if a < -flat {
            let vtx = -b / (T::lit(2.0) * a);
            if vtx > p.lo && vtx < p.hi {
                consider(vtx);
            }
        }
        consider(p.hi);
    }
    best_t
}

fn grid_anchor<T: Real>(j: usize, m: usize) -> T {
    -T::half() + T::half() * T::lit(j as f64) / T::lit((m - 1) as f64)
}

/// Worst-case binary MSE `ḡ(w) = max_{t ∈ [−1/2, 0]} g(w; t)`.
pub fn gbar<T: Real>(
    w: &WeightProfile<T>,
    c: LipschitzBound<T>,
    radii: &[T],
    mode: GbarMode,
) -> Result<WorstCaseReport<T>> {
    w.check_len(radii.len())?;
    w.check_shrinkage()?;
    let ws = w.as_slice();
    let cv = c.value();
    match mode {
        GbarMode::ClosedForm => {
            let t = argmax_anchor(ws, radii, cv);
            Ok(WorstCaseReport {
                value: g_at(ws, radii, cv, t),
                argmax_anchor: Anchor::Single(t),
                method: WorstCaseMethod::ClosedForm,
            })
        }
        GbarMode::Grid(m) => {
            if m < 2 {
                return Err(Error::InvalidArgument(format!(
                    "anchor grid needs at least 2 points, got {m}"
                )));
            }
            let mut best = T::neg_infinity();
            let mut best_t = -T::half();
            for j in 0..m {
                let t = grid_anchor(j, m);
                let v = g_at(ws, radii, cv, t);
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            Ok(WorstCaseReport {
                value: best,
                argmax_anchor: Anchor::Single(best_t),
                method: WorstCaseMethod::Grid,
            })
        }
    }
}

/// Exhaustive maximum of the binary MSE over a grid of the full mean space,
/// keeping only points that satisfy every pairwise Lipschitz constraint.
pub fn worst_case_mse_brute<T: Real>(
    w: &WeightProfile<T>,
    c: LipschitzBound<T>,
    radii: &[T],
    step: T,
) -> Result<WorstCaseReport<T>> {
    let n = radii.len();
    if n > BRUTE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_MAX_N,
        });
    }
    w.check_len(n)?;
    if !(step > T::zero() && step <= T::quarter()) {
        return Err(Error::InvalidArgument(format!(
            "brute-force step must lie in (0, 0.25], got {step}"
        )));
    }
    let tol = T::lit(1e-12);
    let count = ((T::one() + tol) / step).floor().to_usize().unwrap_or(0) + 1;
    let levels: Vec<T> = (0..count)
        .map(|j| -T::half() + step * T::lit(j as f64))
        .collect();
    let pos: Vec<T> = std::iter::once(T::zero())
        .chain(radii.iter().copied())
        .collect();

    struct Search<'a, T> {
        levels: &'a [T],
        pos: &'a [T],
        w: &'a [T],
        c: T,
        tol: T,
        theta: Vec<T>,
        best: T,
        best_t0: T,
    }
    impl<T: Real> Search<'_, T> {
        fn run(&mut self, depth: usize) {
            if depth == self.pos.len() {
                let th = &self.theta;
                let bias = ordered_sum(self.w.iter().zip(&th[1..]).map(|(w, t)| *w * *t)) - th[0];
                let var = ordered_sum(
                    self.w
                        .iter()
                        .zip(&th[1..])
                        .map(|(w, t)| *w * *w * (T::quarter() - *t * *t)),
                );
                let v = bias * bias + var;
                if v > self.best {
                    self.best = v;
                    self.best_t0 = th[0];
                }
                return;
            }
            for &lv in self.levels {
                let ok = (0..depth).all(|j| {
                    (lv - self.theta[j]).abs()
                        <= self.c * (self.pos[depth] - self.pos[j]).abs() + self.tol
                });
                if ok {
                    self.theta.push(lv);
                    self.run(depth + 1);
                    self.theta.pop();
                }
            }
        }
    }

    let mut s = Search {
        levels: &levels,
        pos: &pos,
        w: w.as_slice(),
        c: c.value(),
        tol,
        theta: Vec::with_capacity(n + 1),
        best: T::neg_infinity(),
        best_t0: -T::half(),
    };
    s.run(0);
    Ok(WorstCaseReport {
        value: s.best,
        argmax_anchor: Anchor::Single(s.best_t0),
        method: WorstCaseMethod::Brute,
    })
}

/// Joint MSE of the difference estimator with treated anchor `tp ∈ [−1/2, 0]`
/// on the upper envelope and control anchor `tm ∈ [0, 1/2]` on the lower one.
#[inline]
pub(crate) fn ate_mse_at<T: Real>(wp: &[T], rp: &[T], wm: &[T], rm: &[T], c: T, tp: T, tm: T) -> T {
    let (bp, vp) = side_bias_var(wp, rp, c, tp);
    // The lower envelope at tm is the negated upper envelope at −tm.
    let (bm, vm) = side_bias_var(wm, rm, c, -tm);
    let b = bp + bm;
    b * b + vp + vm
}

/// Gradients of the joint MSE at fixed anchors, written into `gp` and `gm`.
pub(crate) fn ate_gradient<T: Real>(
    wp: &[T],
    rp: &[T],
    wm: &[T],
    rm: &[T],
    c: T,
    tp: T,
    tm: T,
    gp: &mut [T],
    gm: &mut [T],
) {
    let (bp, _) = side_bias_var(wp, rp, c, tp);
    let (bm, _) = side_bias_var(wm, rm, c, -tm);
    let b = bp + bm;
    let two = T::lit(2.0);
    let s = -tm;
    for ((o, wi), ri) in gp.iter_mut().zip(wp).zip(rp) {
        let th = (tp + c * *ri).min(T::half());
        *o = two * b * th + two * *wi * (T::quarter() - th * th);
    }
    for ((o, wi), ri) in gm.iter_mut().zip(wm).zip(rm) {
        let th = (s + c * *ri).min(T::half());
        *o = two * b * th + two * *wi * (T::quarter() - th * th);
    }
}

/// Exact joint maximizer `(tp, tm)` over `[−1/2, 0] × [0, 1/2]`.
pub(crate) fn ate_argmax<T: Real>(wp: &[T], rp: &[T], wm: &[T], rm: &[T], c: T) -> (T, T) {
    let two = T::lit(2.0);
    let flat = T::lit(FLAT_CURVATURE);
    let pp = side_pieces(wp, rp, c);
    let pm = side_pieces(wm, rm, c);
    let mut best = T::neg_infinity();
    let (mut bx, mut by) = (-T::half(), -T::half());
    for p in &pp {
        for q in &pm {
            // f(x, y) over x = tp and y = −tm, both in [−1/2, 0].
            let beta = p.icpt + q.icpt;
            let qxx = p.slope * p.slope + p.vq;
            let qyy = q.slope * q.slope + q.vq;
            let qxy = p.slope * q.slope;
            let lx = two * p.slope * beta + p.vl;
            let ly = two * q.slope * beta + q.vl;
            let k = beta * beta + p.vc + q.vc;
            let f =
                |x: T, y: T| qxx * x * x + two * qxy * x * y + qyy * y * y + lx * x + ly * y + k;
            let mut consider = |x: T, y: T| {
                let v = f(x, y);
                if v > best {
                    best = v;
                    bx = x;
                    by = y;
                }
            };
            for &x in &[p.lo, p.hi] {
                for &y in &[q.lo, q.hi] {
                    consider(x, y);
                }
            }
            if qyy < -flat {
                for &x in &[p.lo, p.hi] {
                    let y = -(two * qxy * x + ly) / (two * qyy);
                    if y > q.lo && y < q.hi {
                        consider(x, y);
                    }
                }
            }
            if qxx < -flat {
                for &y in &[q.lo, q.hi] {
                    let x = -(two * qxy * y + lx) / (two * qxx);
                    if x > p.lo && x < p.hi {
                        consider(x, y);
                    }
                }
            }
            let det = qxx * qyy - qxy * qxy;
            if qxx < -flat && det > flat {
                let x = (qxy * ly - qyy * lx) / (two * det);
                let y = (qxy * lx - qxx * ly) / (two * det);
                if x > p.lo && x < p.hi && y > q.lo && y < q.hi {
                    consider(x, y);
                }
            }
        }
    }
    (bx, -by)
}

fn golden_max<T: Real>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Worst-case MSE of the difference estimator on raw per-side radii.
pub fn ate_worst_case_mse_radii<T: Real>(
    w_plus: &WeightProfile<T>,
    radii_plus: &[T],
    w_minus: &WeightProfile<T>,
    radii_minus: &[T],
    c: LipschitzBound<T>,
    mode: AteMode,
) -> Result<WorstCaseReport<T>> {
    w_plus.check_len(radii_plus.len())?;
    w_minus.check_len(radii_minus.len())?;
    w_plus.check_shrinkage()?;
    w_minus.check_shrinkage()?;
    let (wp, wm) = (w_plus.as_slice(), w_minus.as_slice());
    let cv = c.value();
    let eval = |tp: T, tm: T| ate_mse_at(wp, radii_plus, wm, radii_minus, cv, tp, tm);
    match mode {
        AteMode::Exact => {
            let (tp, tm) = ate_argmax(wp, radii_plus, wm, radii_minus, cv);
            Ok(WorstCaseReport {
                value: eval(tp, tm),
                argmax_anchor: Anchor::Pair(tp, tm),
                method: WorstCaseMethod::ClosedForm,
            })
        }
        AteMode::Grid { m, refine } => {
            if m < 2 {
                return Err(Error::InvalidArgument(format!(
                    "anchor grid needs at least 2 points, got {m}"
                )));
            }
            let grid: Vec<T> = (0..m).map(|j| grid_anchor::<T>(j, m)).collect();
            let plus: Vec<(T, T)> = grid
                .iter()
                .map(|t| side_bias_var(wp, radii_plus, cv, *t))
                .collect();
            let minus: Vec<(T, T)> = grid
                .iter()
                .map(|s| side_bias_var(wm, radii_minus, cv, *s))
                .collect();
            let mut best = T::neg_infinity();
            let (mut ip, mut im) = (0, 0);
            for (i, (bp, vp)) in plus.iter().enumerate() {
                for (j, (bm, vm)) in minus.iter().enumerate() {
                    let b = *bp + *bm;
                    let v = b * b + *vp + *vm;
                    if v > best {
                        best = v;
                        ip = i;
                        im = j;
                    }
                }
            }
            let mut tp = grid[ip];
            let mut tm = -grid[im];
            if refine {
                let h = T::half() / T::lit((m - 1) as f64);
                let lo_p = (tp - h).max(-T::half());
                let hi_p = (tp + h).min(T::zero());
                let (x, fx) = golden_max(lo_p, hi_p, |x| eval(x, tm));
                if fx > best {
                    best = fx;
                    tp = x;
                }
                let lo_m = (tm - h).max(T::zero());
                let hi_m = (tm + h).min(T::half());
                let (y, fy) = golden_max(lo_m, hi_m, |y| eval(tp, y));
                if fy > best {
                    best = fy;
                    tm = y;
                }
            }
            Ok(WorstCaseReport {
                value: best,
                argmax_anchor: Anchor::Pair(tp, tm),
                method: WorstCaseMethod::Grid,
            })
        }
    }
}

/// Worst-case MSE of the difference estimator for a design.
pub fn ate_worst_case_mse<T: Real>(
    w_plus: &WeightProfile<T>,
    w_minus: &WeightProfile<T>,
    c: LipschitzBound<T>,
    design: &crate::model::Design<T>,
    mode: AteMode,
) -> Result<WorstCaseReport<T>> {
    ate_worst_case_mse_radii(
        w_plus,
        design.treated.radii(),
        w_minus,
        design.control.radii(),
        c,
        mode,
    )
}
