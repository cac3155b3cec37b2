//! Result emission: one JSON summary plus flat CSV tables per run.
//!
//! Floating-point values are written in shortest round-trip form, so reading
//! a table back reproduces the in-memory numbers bit for bit. Column orders
//! are fixed and documented in the README:
//! * `replicates.csv`: `replicate,mlpd,cpp_positive,a_star,map_pred,boundary_draws,convexity_violations,solver_failures`
//! * `splits.csv`: `split,mlpd,positive,gain_clean,gain_outlier,boundary_draws,solver_failures`
//! * `plotdata_gains.csv`: `split,row,is_outlier,gain`

use std::fs;
use std::path::{Path, PathBuf};

use cpp_core::lab::ScenarioSummary;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{PredictError, Result};
use crate::eval::SplitReport;

/// Locked header of `replicates.csv`.
pub const REPLICATES_SCHEMA: &str =
    "replicate,mlpd,cpp_positive,a_star,map_pred,boundary_draws,convexity_violations,solver_failures";

/// Locked header of `splits.csv`.
pub const SPLITS_SCHEMA: &str =
    "split,mlpd,positive,gain_clean,gain_outlier,boundary_draws,solver_failures";

/// Locked header of `plotdata_gains.csv`.
pub const GAINS_SCHEMA: &str = "split,row,is_outlier,gain";

#[derive(Serialize)]
struct ReplicateRow {
    replicate: usize,
    mlpd: f64,
    cpp_positive: bool,
    a_star: f64,
    map_pred: f64,
    boundary_draws: usize,
    convexity_violations: usize,
    solver_failures: usize,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PredictError::io(dir, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| PredictError::Config(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| PredictError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| PredictError::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(true).from_writer(file))
}

/// Writes a simulation run: `summary.json` and `replicates.csv`.
///
/// The summary echoes the full configuration and the exact seed, so rerunning
/// with the echoed config reproduces every number bit for bit.
pub fn emit_scenario(
    summary: &ScenarioSummary,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let replicates_path = out_dir.join("replicates.csv");
    let mut writer = csv_writer(&replicates_path)?;
    for (i, r) in summary.replicates.iter().enumerate() {
        writer
            .serialize(ReplicateRow {
                replicate: i + 1,
                mlpd: r.mlpd,
                cpp_positive: r.cpp_positive,
                a_star: r.a_star,
                map_pred: r.map_pred,
                boundary_draws: r.diagnostics.boundary_draws,
                convexity_violations: r.diagnostics.convexity_violations,
                solver_failures: r.diagnostics.solver_failures,
            })
            .map_err(|e| PredictError::Config(format!("writing replicates.csv: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| PredictError::io(&replicates_path, e))?;

    let summary_path = out_dir.join("summary.json");
    write_json(
        &summary_path,
        &json!({
            "command": "simulate",
            "config": config,
            "seed": config.seed,
            "metrics": {
                "mean_mlpd": summary.mean_mlpd,
                "se_mlpd": summary.se_mlpd,
                "ci_lower": summary.ci_lower,
                "ci_upper": summary.ci_upper,
                "frac_positive": summary.frac_positive,
                "n_replicates": summary.replicates.len(),
            },
        }),
    )?;
    Ok(vec![summary_path, replicates_path])
}

/// Dataset facts echoed into a split-eval summary.
#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    /// Source path as given on the command line.
    pub path: String,
    /// Complete observations.
    pub n: usize,
    /// Covariates.
    pub p: usize,
    /// Response column name.
    pub response: String,
    /// 1-based observation numbers dropped for missing cells.
    pub dropped_rows: Vec<usize>,
    /// Names of constant columns.
    pub constant_columns: Vec<String>,
    /// 1-based complete-case numbers of the held-out outliers.
    pub outlier_rows: Vec<usize>,
}

/// Writes a split-eval run: `summary.json`, `splits.csv`, and
/// `plotdata_gains.csv`.
pub fn emit_split_report(
    report: &SplitReport,
    config: &RunConfig,
    data: &DataSummary,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let splits_path = out_dir.join("splits.csv");
    let mut writer = csv_writer(&splits_path)?;
    for row in &report.rows {
        writer
            .serialize(row)
            .map_err(|e| PredictError::Config(format!("writing splits.csv: {e}")))?;
    }
    writer.flush().map_err(|e| PredictError::io(&splits_path, e))?;

    let gains_path = out_dir.join("plotdata_gains.csv");
    let mut writer = csv_writer(&gains_path)?;
    for obs in &report.observations {
        writer
            .serialize(obs)
            .map_err(|e| PredictError::Config(format!("writing plotdata_gains.csv: {e}")))?;
    }
    writer.flush().map_err(|e| PredictError::io(&gains_path, e))?;

    let summary_path = out_dir.join("summary.json");
    write_json(
        &summary_path,
        &json!({
            "command": "split-eval",
            "config": config,
            "seed": config.seed,
            "data": data,
            "metrics": {
                "mean_mlpd": report.mean_mlpd,
                "se_mlpd": report.se_mlpd,
                "ci_lower": report.ci_lower,
                "ci_upper": report.ci_upper,
                "n_positive": report.n_positive,
                "n_splits": report.n_splits,
                "gain_clean": report.pooled_gain_clean,
                "gain_outlier": report.pooled_gain_outlier,
            },
        }),
    )?;
    Ok(vec![summary_path, splits_path, gains_path])
}
