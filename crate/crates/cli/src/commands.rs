use std::io::Write;

use rdbinary::simulation::{
    lee_from_config, run_mc_study, DgpSpec, EstimatorKind, StudySpec, LEE_DEFAULT_CONFIG,
};
use rdbinary::{
    ate_estimate, ate_worst_case_mse, compare_grid, hoeffding_ci, ratio_csv, shrinkage_estimate,
    solve_ate_weights, AteMode, Calibrator, HoeffdingKind, InferenceConfig, LipschitzBound, Method,
    MethodChoice, SolverOptions, WeightProfile,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::input::{nearest_cutoff, read_rows, read_weights, weight_rows, Row, Sample};
use crate::rot::{rot_c, RotReport};
use crate::{Command, Format, HoeffdingArg, InferenceArgs, MethodArg, OutputArgs, SmoothArgs};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Weights {
            data,
            smooth,
            seed,
            output,
        } => {
            let rows = read_rows(&data.input)?;
            let c = resolve_c(&smooth, &rows, data.cutoff)?;
            let sample = Sample::new(&rows, data.cutoff)?;
            let opts = SolverOptions {
                seed,
                ..SolverOptions::default()
            };
            let (p, m) = solve_ate_weights(&sample.design, c.bound()?, &opts)?;
            let mse = ate_worst_case_mse(
                &p.weights,
                &m.weights,
                c.bound()?,
                &sample.design,
                AteMode::Exact,
            )?
            .value;
            let rows = weight_rows(&sample, &p.weights, &m.weights);
            let prov = provenance(
                "weights",
                json!({"input": data.input, "cutoff": data.cutoff, "C": c.value, "C_source": c.source, "seed": seed, "solver": opts}),
            );
            emit(
                &output,
                Format::Json,
                || {
                    Ok(json!({
                        "provenance": prov,
                        "worst_case_mse": mse,
                        "worst_case_rmse": mse.sqrt(),
                        "converged": p.converged && m.converged,
                        "weights": rows,
                    }))
                },
                || to_csv(&rows),
            )
        }
        Command::Estimate {
            data,
            smooth,
            weights_file,
            seed,
            output,
        } => {
            let rows = read_rows(&data.input)?;
            let c = resolve_c(&smooth, &rows, data.cutoff)?;
            let sample = Sample::new(&rows, data.cutoff)?;
            let opts = SolverOptions {
                seed,
                ..SolverOptions::default()
            };
            let (wp, wm) = match &weights_file {
                Some(path) => read_weights(path, &sample)?,
                None => {
                    let (p, m) = solve_ate_weights(&sample.design, c.bound()?, &opts)?;
                    (p.weights, m.weights)
                }
            };
            let est = estimate(&sample, &wp, &wm, c.bound()?)?;
            let prov = provenance(
                "estimate",
                json!({"input": data.input, "cutoff": data.cutoff, "C": c.value, "C_source": c.source, "seed": seed,
                       "weights_file": weights_file, "solver": opts}),
            );
            emit(
                &output,
                Format::Json,
                || Ok(merge(json!({"provenance": prov}), &est)),
                || to_csv(std::slice::from_ref(&est)),
            )
        }
        Command::Ci {
            data,
            smooth,
            inference,
            output,
        } => {
            let rows = read_rows(&data.input)?;
            let c = resolve_c(&smooth, &rows, data.cutoff)?;
            let sample = Sample::new(&rows, data.cutoff)?;
            let body = ci_body(&sample, Some(data.cutoff), c.value, &inference)?;
            let prov = provenance(
                "ci",
                json!({"input": data.input, "cutoff": data.cutoff, "C": c.value, "C_source": c.source,
                       "inference": inference_config(&inference)}),
            );
            emit(
                &output,
                Format::Json,
                || Ok(merge(json!({"provenance": prov}), &body)),
                || to_csv(std::slice::from_ref(&body)),
            )
        }
        Command::MultiCutoff {
            input,
            cutoffs,
            smooth,
            inference,
            output,
        } => {
            let rows = read_rows(&input)?;
            let mut groups: Vec<Vec<Row>> = vec![Vec::new(); cutoffs.len()];
            for row in &rows {
                groups[nearest_cutoff(row.r, &cutoffs)].push(*row);
            }
            let pooled_rows: Vec<Row> = rows
                .iter()
                .map(|row| Row {
                    r: row.r - cutoffs[nearest_cutoff(row.r, &cutoffs)],
                    ..*row
                })
                .collect();
            let c = resolve_c(&smooth, &pooled_rows, 0.0)?;
            let mut per_cutoff = Vec::with_capacity(cutoffs.len());
            for (cut, group) in cutoffs.iter().zip(&groups) {
                if group.is_empty() {
                    return Err(CliError::Input(format!(
                        "no rows are nearest to cutoff {cut}"
                    )));
                }
                let sample = Sample::new(group, *cut)
                    .map_err(|e| CliError::Input(format!("cutoff {cut}: {e}")))?;
                per_cutoff.push(ci_body(&sample, Some(*cut), c.value, &inference)?);
            }
            let pooled = ci_body(&Sample::new(&pooled_rows, 0.0)?, None, c.value, &inference)?;
            let prov = provenance(
                "multi-cutoff",
                json!({"input": input, "cutoffs": cutoffs, "tie_rule": "lower cutoff", "C": c.value, "C_source": c.source,
                       "inference": inference_config(&inference)}),
            );
            emit(
                &output,
                Format::Json,
                || Ok(json!({"provenance": prov, "per_cutoff": per_cutoff, "pooled": pooled})),
                || {
                    let mut all = per_cutoff.clone();
                    all.push(pooled.clone());
                    to_csv(&all)
                },
            )
        }
        Command::RotC { data, bins, output } => {
            let rows = read_rows(&data.input)?;
            let rep = rot_c(&rows, data.cutoff, bins)?;
            if rep.c_rot == 0.0 {
                eprintln!("warning: InsufficientSlope: the rule-of-thumb constant is 0; pass --C explicitly");
            }
            let prov = provenance(
                "rot-c",
                json!({"input": data.input, "cutoff": data.cutoff, "bins": bins}),
            );
            emit(
                &output,
                Format::Json,
                || Ok(merge(json!({"provenance": prov}), &rep)),
                || to_csv(std::slice::from_ref(&rep)),
            )
        }
        Command::Simulate {
            dgp,
            dgp_c,
            config,
            n,
            c,
            reps,
            ci_reps,
            estimators,
            inference,
            output,
        } => {
            let dgp = match dgp.as_str() {
                "flat" => DgpSpec::flat(),
                "worst-case" | "worst_case" => DgpSpec::WorstCaseEnvelope {
                    c: dgp_c.unwrap_or(c),
                },
                "lee" => {
                    let text = match &config {
                        Some(path) => std::fs::read_to_string(path).map_err(|e| {
                            CliError::Input(format!("cannot read {}: {e}", path.display()))
                        })?,
                        None => LEE_DEFAULT_CONFIG.to_string(),
                    };
                    lee_from_config(&text)?
                }
                other => {
                    return Err(CliError::Input(format!(
                        "unknown dgp `{other}` (expected flat, worst-case or lee)"
                    )))
                }
            };
            let mut spec = StudySpec::new(dgp, n, c);
            spec.replications = reps;
            spec.ci_replications = ci_reps;
            spec.alpha = inference.alpha;
            spec.seed = inference.seed;
            spec.inference = inference_config(&inference);
            spec.solver.seed = inference.seed;
            spec.estimators = estimators
                .iter()
                .map(|e| parse_estimator(e))
                .collect::<CliResult<_>>()?;
            let report = run_mc_study(&spec)?;
            let prov = provenance("simulate", json!({"spec": spec}));
            emit(
                &output,
                Format::Json,
                || Ok(json!({"provenance": prov, "report": report})),
                || Ok(report.to_csv()),
            )
        }
        Command::CompareGauss {
            ns,
            cs,
            seed,
            output,
        } => {
            let opts = SolverOptions {
                seed,
                ..SolverOptions::default()
            };
            let reports = compare_grid(&ns, &cs, &opts)?;
            let prov = provenance("compare-gauss", json!({"n": ns, "C": cs, "solver": opts}));
            emit(
                &output,
                Format::Csv,
                || Ok(json!({"provenance": prov, "reports": reports})),
                || Ok(ratio_csv(&reports)),
            )
        }
    }
}

struct ResolvedC {
    value: f64,
    source: &'static str,
}

impl ResolvedC {
    fn bound(&self) -> CliResult<LipschitzBound<f64>> {
        Ok(LipschitzBound::new(self.value)?)
    }
}

fn resolve_c(smooth: &SmoothArgs, rows: &[Row], cutoff: f64) -> CliResult<ResolvedC> {
    match (smooth.c, smooth.rot) {
        (Some(c), _) => {
            if !(c.is_finite() && c > 0.0) {
                return Err(CliError::Input(format!(
                    "--C must be a positive number, got {c}"
                )));
            }
            Ok(ResolvedC {
                value: c,
                source: "user",
            })
        }
        (None, true) => {
            let RotReport { c_rot, .. } = rot_c(rows, cutoff, smooth.bins)?;
            if c_rot == 0.0 {
                return Err(CliError::Input(
                    "InsufficientSlope: the rule-of-thumb constant is 0; pass --C explicitly"
                        .into(),
                ));
            }
            Ok(ResolvedC {
                value: c_rot,
                source: "rot",
            })
        }
        (None, false) => Err(CliError::Input("either --C or --rot is required".into())),
    }
}

fn parse_estimator(name: &str) -> CliResult<EstimatorKind> {
    match name.trim() {
        "rdbinary" => Ok(EstimatorKind::Rdbinary),
        "gauss" => Ok(EstimatorKind::Gauss),
        "local_mean" | "local-mean" => Ok(EstimatorKind::LocalMean),
        other => Err(CliError::Input(format!("unknown estimator `{other}`"))),
    }
}

fn inference_config(a: &InferenceArgs) -> InferenceConfig {
    InferenceConfig {
        method: match a.method {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Exact => MethodChoice::Exact,
            MethodArg::Mc => MethodChoice::MonteCarlo,
        },
        anchor_grid: a.anchors,
        n_sims: a.sims,
        seed: a.seed,
        bisection_steps: a.bisection_steps,
    }
}

#[derive(Debug, Clone, Serialize)]
struct Estimate {
    tau_hat: f64,
    mu_plus: f64,
    mu_minus: f64,
    worst_case_mse: f64,
    worst_case_rmse: f64,
    #[serde(rename = "C")]
    c: f64,
    n_treated: usize,
    n_control: usize,
}

fn estimate(
    sample: &Sample,
    wp: &WeightProfile<f64>,
    wm: &WeightProfile<f64>,
    c: LipschitzBound<f64>,
) -> CliResult<Estimate> {
    let d = &sample.design;
    let mse = ate_worst_case_mse(wp, wm, c, d, AteMode::Exact)?.value;
    Ok(Estimate {
        tau_hat: ate_estimate(d, wp, wm)?,
        mu_plus: shrinkage_estimate(&d.treated, wp)?,
        mu_minus: shrinkage_estimate(&d.control, wm)?,
        worst_case_mse: mse,
        worst_case_rmse: mse.sqrt(),
        c: c.value(),
        n_treated: d.treated.len(),
        n_control: d.control.len(),
    })
}

/// Flat interval report, serialized as JSON or CSV.
#[derive(Debug, Clone, Serialize)]
struct CiBody {
    cutoff: Option<f64>,
    n_treated: usize,
    n_control: usize,
    #[serde(rename = "C")]
    c: f64,
    tau_hat: f64,
    lower: f64,
    upper: f64,
    length: f64,
    alpha: f64,
    interval: &'static str,
    method: Option<&'static str>,
    seed: u64,
    n_sims: usize,
    anchor_grid: usize,
    bisection_steps: usize,
    hoeffding_gamma: Option<f64>,
    max_bias: Option<f64>,
}

fn ci_body(sample: &Sample, cutoff: Option<f64>, c: f64, a: &InferenceArgs) -> CliResult<CiBody> {
    let lip = LipschitzBound::new(c)?;
    let d = &sample.design;
    let opts = SolverOptions {
        seed: a.seed,
        ..SolverOptions::default()
    };
    let (p, m) = solve_ate_weights(d, lip, &opts)?;
    let config = inference_config(a);
    let mut body = CiBody {
        cutoff,
        n_treated: d.treated.len(),
        n_control: d.control.len(),
        c,
        tau_hat: 0.0,
        lower: 0.0,
        upper: 0.0,
        length: 0.0,
        alpha: a.alpha,
        interval: "calibrated",
        method: None,
        seed: a.seed,
        n_sims: a.sims,
        anchor_grid: a.anchors,
        bisection_steps: a.bisection_steps,
        hoeffding_gamma: None,
        max_bias: None,
    };
    match a.hoeffding {
        Some(kind) => {
            let (kind, label) = match kind {
                HoeffdingArg::One => (HoeffdingKind::One, "hoeffding_one_sided"),
                HoeffdingArg::Naive => (HoeffdingKind::TwoNaive, "hoeffding_naive"),
                HoeffdingArg::Optimized => (HoeffdingKind::TwoOptimized, "hoeffding_optimized"),
            };
            let h = hoeffding_ci(d, &p.weights, &m.weights, lip, a.alpha, kind)?;
            body.interval = label;
            (body.tau_hat, body.lower, body.upper) = (h.tau_hat, h.lower, h.upper);
            body.hoeffding_gamma = Some(h.gamma);
            body.max_bias = Some(h.max_bias);
        }
        None => {
            let tau_hat = ate_estimate(d, &p.weights, &m.weights)?;
            let cal = Calibrator::new(d, &p.weights, &m.weights, lip, config)?;
            let ci = cal.interval(tau_hat, a.alpha)?;
            (body.tau_hat, body.lower, body.upper) = (ci.tau_hat, ci.lower, ci.upper);
            body.method = Some(match ci.method {
                Method::Exact => "exact",
                Method::MonteCarlo => "monte_carlo",
            });
        }
    }
    body.length = body.upper - body.lower;
    Ok(body)
}

fn provenance(command: &str, params: Value) -> Value {
    let mut map = Map::new();
    map.insert("tool".into(), json!("rdbinary"));
    map.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    map.insert("command".into(), json!(command));
    if let Value::Object(extra) = params {
        map.extend(extra);
    }
    Value::Object(map)
}

fn merge(base: Value, body: &impl Serialize) -> Value {
    let mut out = match base {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Ok(Value::Object(extra)) = serde_json::to_value(body) {
        out.extend(extra);
    }
    Value::Object(out)
}

fn to_csv<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn emit(
    output: &OutputArgs,
    default: Format,
    as_json: impl FnOnce() -> CliResult<Value>,
    as_csv: impl FnOnce() -> CliResult<String>,
) -> CliResult<()> {
    let text = match output.format.unwrap_or(default) {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&as_json()?)
                .map_err(|e| CliError::Input(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => as_csv()?,
    };
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
