//! Rule-of-thumb Lipschitz constant from binned means.
//!
//! Per side, the radius range is split into equal-width bins. Bins with fewer
//! than two observations are skipped, and the estimate is the largest absolute
//! slope between consecutive usable bin centers.

use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::input::Row;

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotReport {
    pub bins: usize,
    pub treated: Option<f64>,
    pub control: Option<f64>,
    #[serde(rename = "C_rot")]
    pub c_rot: f64,
}

fn side_slope(radii: &[f64], y: &[f64], bins: usize) -> Option<f64> {
    let (lo, hi) = (*radii.first()?, *radii.last()?);
    let width = (hi - lo) / bins as f64;
    if !(width > 0.0) {
        return None;
    }
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (r, v) in radii.iter().zip(y) {
        let b = (((r - lo) / width) as usize).min(bins - 1);
        sum[b] += v;
        count[b] += 1;
    }
    let usable: Vec<(f64, f64)> = (0..bins)
        .filter(|b| count[*b] >= 2)
        .map(|b| (lo + (b as f64 + 0.5) * width, sum[b] / count[b] as f64))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    Some(
        usable
            .windows(2)
            .map(|p| ((p[1].1 - p[0].1) / (p[1].0 - p[0].0)).abs())
            .fold(0.0, f64::max),
    )
}

fn split(rows: &[Row], cutoff: f64, treated: bool) -> (Vec<f64>, Vec<f64>) {
    let mut side: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| (r.r >= cutoff) == treated)
        .map(|r| ((r.r - cutoff).abs(), r.y))
        .collect();
    side.sort_by(|a, b| a.0.total_cmp(&b.0));
    side.into_iter().unzip()
}

pub fn rot_c(rows: &[Row], cutoff: f64, bins: usize) -> CliResult<RotReport> {
    if bins < 2 {
        return Err(CliError::Input("--bins must be at least 2".into()));
    }
    let (rp, yp) = split(rows, cutoff, true);
    let (rm, ym) = split(rows, cutoff, false);
    let treated = side_slope(&rp, &yp, bins);
    let control = side_slope(&rm, &ym, bins);
    let c_rot = match (treated, control) {
        (None, None) => {
            return Err(CliError::InsufficientData(
                "fewer than two bins with at least two observations on both sides".into(),
            ))
        }
        (a, b) => a.unwrap_or(0.0).max(b.unwrap_or(0.0)),
    };
    Ok(RotReport {
        bins,
        treated,
        control,
        c_rot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(points: Vec<(f64, f64)>) -> Vec<Row> {
        points
            .into_iter()
            .enumerate()
            .map(|(i, (r, y))| Row {
                line: i as u64 + 2,
                r,
                y,
            })
            .collect()
    }

    #[test]
    fn linear_side_recovers_slope() {
        let mut points: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let r = (i as f64 + 0.5) / 200.0;
                (r, 0.5 + 0.3 * r)
            })
            .collect();
        points.extend((0..50).map(|i| (-(i as f64 + 0.5) / 50.0, 0.5)));
        let rep = rot_c(&rows(points), 0.0, DEFAULT_BINS).unwrap();
        assert!((rep.c_rot - 0.3).abs() < 0.01, "{rep:?}");
        assert_eq!(rep.control, Some(0.0));
    }

    #[test]
    fn flat_data_gives_zero() {
        let points: Vec<(f64, f64)> = (0..40)
            .map(|i| (-1.0 + (i as f64 + 0.5) / 20.0, 0.5))
            .collect();
        assert_eq!(rot_c(&rows(points), 0.0, DEFAULT_BINS).unwrap().c_rot, 0.0);
    }

    #[test]
    fn too_few_observations() {
        let one = rows(vec![(0.1, 1.0)]);
        assert!(matches!(
            rot_c(&one, 0.0, DEFAULT_BINS),
            Err(CliError::InsufficientData(_))
        ));
    }
}
