//! Result files of an experiment.
//!
//! ```text
//! outdir/
//!   run.json                     configuration, summary rows, scaling fits
//!   summary.csv                  one row per (n, algorithm)
//!   curves/<alg>_n<n>.csv        t,mean,stderr,normalized
//!   plots/regret_vs_t.svg
//!   plots/normalized_regret_vs_t.svg
//!   plots/regret_vs_n.svg
//!   traces/<alg>_n<n>_path<p>.csv            (first `traces` paths only)
//!   traces/<alg>_n<n>_path<p>.episodes.json
//! ```
//!
//! Every file is a pure function of the experiment result.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::fit::{fit_scaling, ScalingFit, ScalingModel};
use super::svg::{line_chart, Series};
use super::{ExperimentResult, RegretCurve};
use crate::config::{AlgorithmName, ExperimentConfig};
use crate::error::{Error, Result};
use crate::trace::{episodes_json, write_trace_csv};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub environment: &'static str,
    pub mode: &'static str,
    pub n: usize,
    pub algorithm: &'static str,
    pub paths: usize,
    #[serde(rename = "regret_T")]
    pub regret_t: f64,
    #[serde(rename = "stderr_T")]
    pub stderr_t: f64,
    #[serde(rename = "regret_T_over_sqrt_T")]
    pub regret_t_over_sqrt_t: f64,
    /// Over `t ∈ [T/5, T]`; empty when some mean regret there is not positive.
    pub loglog_slope: Option<f64>,
    /// Mean over paths of the baseline gain and of its standard error.
    pub baseline_gain: f64,
    pub baseline_stderr: f64,
    /// True arms, summed over paths, that failed the grid indexability check.
    pub unverified_arms: usize,
    /// Mean episode count; zero for algorithms without episodes.
    pub mean_episodes: f64,
    /// Episodes, summed over paths, whose first posterior draw was redrawn.
    pub resampled_episodes: usize,
}

fn algorithm_index(config: &ExperimentConfig, algorithm: AlgorithmName) -> usize {
    config.algorithms.iter().position(|&a| a == algorithm).expect("curve of a configured algorithm")
}

pub fn summary_rows(result: &ExperimentResult) -> Vec<SummaryRow> {
    let config = &result.config;
    result
        .curves
        .iter()
        .map(|curve| {
            let k = algorithm_index(config, curve.algorithm);
            let group: Vec<_> = result.outcomes.iter().filter(|o| o.n == curve.n).collect();
            let p = group.len() as f64;
            let horizon = curve.horizon();
            SummaryRow {
                environment: config.environment.label(),
                mode: config.mode.label(),
                n: curve.n,
                algorithm: curve.algorithm.label(),
                paths: curve.paths,
                regret_t: curve.final_regret(),
                stderr_t: *curve.stderr.last().unwrap_or(&0.0),
                regret_t_over_sqrt_t: curve.normalized()[horizon],
                loglog_slope: curve.log_log_slope(horizon / 5, horizon),
                baseline_gain: group.iter().map(|o| o.baseline.mean).sum::<f64>() / p,
                baseline_stderr: group.iter().map(|o| o.baseline.stderr).sum::<f64>() / p,
                unverified_arms: group.iter().map(|o| o.unverified_arms).sum(),
                mean_episodes: group.iter().map(|o| o.runs[k].episodes.len() as f64).sum::<f64>() / p,
                resampled_episodes: group.iter().map(|o| o.runs[k].episodes.iter().filter(|e| e.resampled).count()).sum(),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct FitReport {
    algorithm: &'static str,
    points: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<ScalingFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected: Option<ScalingModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unavailable: Option<String>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    schema_version: u32,
    environment: &'static str,
    mode: &'static str,
    config: &'a ExperimentConfig,
    summary: &'a [SummaryRow],
    scaling_fits: Vec<FitReport>,
}

fn scaling_fits(result: &ExperimentResult) -> Vec<FitReport> {
    result
        .config
        .algorithms
        .iter()
        .map(|&alg| {
            let points: Vec<(f64, f64)> =
                result.curves.iter().filter(|c| c.algorithm == alg).map(|c| (c.n as f64, c.final_regret())).collect();
            let (fit, unavailable) = match fit_scaling(&points) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let selected = fit.as_ref().map(ScalingFit::selected);
            FitReport { algorithm: alg.label(), points, fit, selected, unavailable }
        })
        .collect()
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn curve_stem(curve: &RegretCurve) -> String {
    format!("{}_n{}", curve.algorithm.label(), curve.n)
}

fn curve_csv(curve: &RegretCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "mean", "stderr", "normalized"])?;
    for (t, ((m, s), z)) in curve.mean.iter().zip(&curve.stderr).zip(curve.normalized()).enumerate() {
        w.write_record([t.to_string(), m.to_string(), s.to_string(), z.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

fn time_series(curve: &RegretCurve, values: &[f64]) -> Series {
    Series {
        label: format!("{} n={}", curve.algorithm.label(), curve.n),
        points: values.iter().enumerate().skip(1).map(|(t, &v)| (t as f64, v)).collect(),
    }
}

fn plots(result: &ExperimentResult) -> [(&'static str, String); 3] {
    let c = &result.config;
    let tag = format!("Env {}, {}, S={}", c.environment.label(), c.mode.label(), c.num_states);
    let regret: Vec<Series> = result.curves.iter().map(|k| time_series(k, &k.mean)).collect();
    let normalized: Vec<Series> = result.curves.iter().map(|k| time_series(k, &k.normalized())).collect();
    let by_n: Vec<Series> = c
        .algorithms
        .iter()
        .map(|&alg| Series {
            label: alg.label().to_string(),
            points: result
                .curves
                .iter()
                .filter(|k| k.algorithm == alg)
                .map(|k| (k.n as f64, k.final_regret()))
                .collect(),
        })
        .collect();
    [
        ("regret_vs_t.svg", line_chart(&format!("Regret, {tag}"), "t", "R(t)", &regret)),
        ("normalized_regret_vs_t.svg", line_chart(&format!("Normalized regret, {tag}"), "t", "R(t)/√t", &normalized)),
        (
            "regret_vs_n.svg",
            line_chart(&format!("Regret at T={}, {tag}", c.horizon), "number of arms n", "R(T)", &by_n),
        ),
    ]
}

/// Writes all result files under `outdir` and returns their paths in
/// writing order.
pub fn emit_results(result: &ExperimentResult, outdir: &Path) -> Result<Vec<PathBuf>> {
    if result.curves.is_empty() {
        return Err(Error::Empty("no regret curves".into()));
    }
    let mut written = Vec::new();
    let mut put = |path: PathBuf, contents: Vec<u8>| -> Result<()> {
        write(&path, contents)?;
        written.push(path);
        Ok(())
    };

    for sub in ["curves", "plots", "traces"] {
        create_dir(&outdir.join(sub))?;
    }
    let rows = summary_rows(result);
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        environment: result.config.environment.label(),
        mode: result.config.mode.label(),
        config: &result.config,
        summary: &rows,
        scaling_fits: scaling_fits(result),
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Error::json(outdir.join("run.json"), e))?;
    json.push('\n');
    put(outdir.join("run.json"), json.into_bytes())?;
    put(outdir.join("summary.csv"), summary_csv(&rows)?)?;
    for curve in &result.curves {
        put(outdir.join("curves").join(format!("{}.csv", curve_stem(curve))), curve_csv(curve)?)?;
    }
    for (name, svg) in plots(result) {
        put(outdir.join("plots").join(name), svg.into_bytes())?;
    }
    for outcome in &result.outcomes {
        for run in &outcome.runs {
            let Some(trace) = &run.trace else { continue };
            let stem = format!("{}_n{}_path{}", run.algorithm.label(), outcome.n, outcome.path);
            let mut csv = Vec::new();
            write_trace_csv(&mut csv, trace, Some(outcome.baseline.mean))?;
            put(outdir.join("traces").join(format!("{stem}.csv")), csv)?;
            put(outdir.join("traces").join(format!("{stem}.episodes.json")), episodes_json(trace).into_bytes())?;
        }
    }
    Ok(written)
}
