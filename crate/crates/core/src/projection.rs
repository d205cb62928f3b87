//! Euclidean projections used by the weight solvers.

use crate::scalar::Real;

/// Antitonic regression: the nonincreasing vector closest to `y` (pool adjacent violators).
pub fn pava_nonincreasing<T: Real>(y: &[T]) -> Vec<T> {
    // Blocks as (sum, count); merging keeps block means nonincreasing left to right.
    let mut sums: Vec<T> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y {
        let mut s = v;
        let mut c = 1usize;
        while let (Some(&ps), Some(&pc)) = (sums.last(), counts.last()) {
            // Previous mean < current mean violates the ordering.
            if ps * T::lit(c as f64) < s * T::lit(pc as f64) {
                s = s + ps;
                c += pc;
                sums.pop();
                counts.pop();
            } else {
                break;
            }
        }
        sums.push(s);
        counts.push(c);
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, c) in sums.into_iter().zip(counts) {
        let m = s / T::lit(c as f64);
        out.extend(std::iter::repeat_n(m, c));
    }
    out
}

/// Projection onto `{w : w_1 ≥ … ≥ w_m ≥ 0, Σ w ≤ cap}`.
///
/// The projection is `max(P(y) − λ, 0)` where `P` is antitonic regression and
/// `λ ≥ 0` is the smallest shift meeting the cap.
pub fn project_monotone_capped<T: Real>(y: &[T], cap: T) -> Vec<T> {
    let p = pava_nonincreasing(y);
    let pos: T = p
        .iter()
        .filter(|v| **v > T::zero())
        .fold(T::zero(), |a, b| a + *b);
    if pos <= cap {
        return p.into_iter().map(|v| v.max(T::zero())).collect();
    }
    // p is nonincreasing, so the support of max(p − λ, 0) is a prefix.
    let mut prefix = T::zero();
    let mut lambda = T::zero();
    for (k, &v) in p.iter().enumerate() {
        prefix = prefix + v;
        let l = (prefix - cap) / T::lit((k + 1) as f64);
        let next = p.get(k + 1).copied().unwrap_or(T::neg_infinity());
        if l >= next && l < v {
            lambda = l;
            break;
        }
        lambda = l;
    }
    let lambda = lambda.max(T::zero());
    p.into_iter().map(|v| (v - lambda).max(T::zero())).collect()
}

/// Projection onto the probability simplex (sorting method).
pub fn project_simplex<T: Real>(y: &[T]) -> Vec<T> {
    let mut s: Vec<T> = y.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut prefix = T::zero();
    let mut tau = T::zero();
    for (k, &v) in s.iter().enumerate() {
        prefix = prefix + v;
        let t = (prefix - T::one()) / T::lit((k + 1) as f64);
        if v - t > T::zero() {
            tau = t;
        } else {
            break;
        }
    }
    y.iter().map(|v| (*v - tau).max(T::zero())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pava_pools_violators() {
        assert_eq!(
            pava_nonincreasing(&[1.0, 3.0, 2.0, 0.0]),
            vec![2.0, 2.0, 2.0, 0.0]
        );
        assert_eq!(pava_nonincreasing(&[3.0, 2.0, 1.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(pava_nonincreasing::<f64>(&[]), Vec::<f64>::new());
    }

    #[test]
    fn capped_projection_cases() {
        assert_eq!(
            project_monotone_capped(&[0.2, 0.1, -0.3], 1.0),
            vec![0.2, 0.1, 0.0]
        );
        let p = project_monotone_capped::<f64>(&[1.0, 1.0], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let p = project_monotone_capped(&[2.0, 0.0, 0.5], 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p[0] >= p[1] && p[1] >= p[2] && p[2] >= 0.0);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex::<f64>(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }
}
