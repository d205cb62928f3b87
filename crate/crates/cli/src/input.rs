use std::path::Path;

use rdbinary::{normalize_design, Design, Side, WeightProfile};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One data row with its line number in the input file (header is line 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub line: u64,
    pub r: f64,
    pub y: f64,
}

pub fn read_rows(path: &Path) -> CliResult<Vec<Row>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_rows(&text)
}

pub fn parse_rows(text: &str) -> CliResult<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(&e, 1))?;
    if header.len() != 2 || &header[0] != "r" || &header[1] != "y" {
        return Err(CliError::Parse {
            line: 1,
            message: format!(
                "expected header `r,y`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> CliResult<f64> {
            let raw = &record[i];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Parse {
                    line,
                    message: format!("{name} is not a finite number: `{raw}`"),
                })
        };
        let r = field(0, "r")?;
        let y = field(1, "y")?;
        if !(0.0..=1.0).contains(&y) {
            return Err(CliError::Parse {
                line,
                message: format!("outcome {y} is outside [0, 1]"),
            });
        }
        rows.push(Row { line, r, y });
    }
    if rows.is_empty() {
        return Err(CliError::Input("input has no data rows".into()));
    }
    Ok(rows)
}

fn csv_error(e: &csv::Error, fallback: u64) -> CliError {
    let line = e.position().map_or(fallback, |p| p.line());
    CliError::Parse {
        line,
        message: e.to_string(),
    }
}

/// A design together with the input line of every observation, in design order.
#[derive(Debug, Clone)]
pub struct Sample {
    pub design: Design<f64>,
    pub treated_lines: Vec<u64>,
    pub control_lines: Vec<u64>,
}

impl Sample {
    pub fn new(rows: &[Row], cutoff: f64) -> CliResult<Self> {
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.r, r.y)).collect();
        let design = normalize_design(&points, cutoff)?;
        let order = |treated: bool| {
            let mut side: Vec<(f64, u64)> = rows
                .iter()
                .filter(|r| (r.r >= cutoff) == treated)
                .map(|r| (if treated { r.r - cutoff } else { cutoff - r.r }, r.line))
                .collect();
            side.sort_by(|a, b| a.0.total_cmp(&b.0));
            side.into_iter().map(|(_, l)| l).collect::<Vec<_>>()
        };
        Ok(Self {
            design,
            treated_lines: order(true),
            control_lines: order(false),
        })
    }
}

/// A row of the weights export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub side: Side,
    pub line: u64,
    pub radius: f64,
    pub weight: f64,
}

pub fn weight_rows(
    sample: &Sample,
    wp: &WeightProfile<f64>,
    wm: &WeightProfile<f64>,
) -> Vec<WeightRow> {
    let side = |s: Side, lines: &[u64], radii: &[f64], w: &[f64]| {
        lines
            .iter()
            .zip(radii)
            .zip(w)
            .map(|((line, radius), weight)| WeightRow {
                side: s,
                line: *line,
                radius: *radius,
                weight: *weight,
            })
            .collect::<Vec<_>>()
    };
    let d = &sample.design;
    let mut out = side(
        Side::Treated,
        &sample.treated_lines,
        d.treated.radii(),
        wp.as_slice(),
    );
    out.extend(side(
        Side::Control,
        &sample.control_lines,
        d.control.radii(),
        wm.as_slice(),
    ));
    out
}

#[derive(Deserialize)]
struct WeightsDocument {
    weights: Vec<WeightRow>,
}

/// Reads weights written by the `weights` command (JSON or CSV) and matches them to `sample` by input line.
pub fn read_weights(
    path: &Path,
    sample: &Sample,
) -> CliResult<(WeightProfile<f64>, WeightProfile<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<WeightRow> = if text.trim_start().starts_with('{') {
        serde_json::from_str::<WeightsDocument>(&text)
            .map_err(|e| CliError::Parse {
                line: e.line() as u64,
                message: e.to_string(),
            })?
            .weights
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        reader
            .deserialize()
            .map(|r| r.map_err(|e: csv::Error| csv_error(&e, 0)))
            .collect::<CliResult<Vec<WeightRow>>>()?
    };
    let pick = |side: Side, lines: &[u64]| -> CliResult<WeightProfile<f64>> {
        let w = lines
            .iter()
            .map(|line| {
                rows.iter()
                    .find(|r| r.side == side && r.line == *line)
                    .map(|r| r.weight)
                    .ok_or_else(|| {
                        CliError::Input(format!(
                            "weights file has no {side} entry for input line {line}"
                        ))
                    })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(WeightProfile::new(w)?)
    };
    let expected = sample.treated_lines.len() + sample.control_lines.len();
    if rows.len() != expected {
        return Err(CliError::Input(format!(
            "weights file has {} entries, data has {expected} rows",
            rows.len()
        )));
    }
    Ok((
        pick(Side::Treated, &sample.treated_lines)?,
        pick(Side::Control, &sample.control_lines)?,
    ))
}

/// Index of the cutoff nearest to `r`; ties go to the lower cutoff.
pub fn nearest_cutoff(r: f64, cutoffs: &[f64]) -> usize {
    let mut best = 0;
    for (k, c) in cutoffs.iter().enumerate().skip(1) {
        let d = (r - c).abs();
        let b = (r - cutoffs[best]).abs();
        if d < b || (d == b && *c < cutoffs[best]) {
            best = k;
        }
    }
    best
}
