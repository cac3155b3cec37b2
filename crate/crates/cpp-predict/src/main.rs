//! `cpp-predict`: robust point prediction for Gaussian regression.
//!
//! Subcommands:
//! * `simulate`   — synthetic contamination scenarios with a written report;
//! * `split-eval` — repeated random-split evaluation on a user CSV;
//! * `predict`    — robust prediction at one new covariate row;
//! * `fit`        — model fit summary as JSON on stdout.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use clap::{Parser, Subcommand};
use cpp_core::lab::{run_scenario, ContaminationSpec, SimScenario};

use cpp_predict::config::{Backend, ConventionChoice, RunConfig};
use cpp_predict::emit::{emit_scenario, emit_split_report, DataSummary};
use cpp_predict::eval::split_eval;
use cpp_predict::io::load_csv;
use cpp_predict::predict::{fit_summary, parse_xnew, predict_one};
use cpp_predict::splits::{detect_outliers, OutlierRule, SplitPlan};

#[derive(Parser)]
#[command(
    name = "cpp-predict",
    version,
    about = "Robust point prediction for Gaussian regression by projecting \
             candidate responses onto leave-one-out predictive laws"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic contamination scenario and write its report.
    Simulate {
        /// JSON configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for summary.json and replicates.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate robust against plug-in prediction with repeated random
    /// splits that always hold the identified outliers out.
    #[command(name = "split-eval")]
    SplitEval {
        /// CSV file with a header row.
        #[arg(long)]
        data: PathBuf,
        /// Response column name.
        #[arg(long)]
        response: String,
        /// Outlier rule: `indices:1,5,9`, `studentized:2.5`, or `iqr:1.5`.
        #[arg(long)]
        outliers: String,
        /// JSON configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for summary.json, splits.csv, plotdata_gains.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the response at one new covariate row (original units).
    Predict {
        /// CSV file with a header row.
        #[arg(long)]
        data: PathBuf,
        /// Response column name.
        #[arg(long)]
        response: String,
        /// Comma-separated covariate values in the file's column order
        /// (response excluded).
        #[arg(long)]
        xnew: String,
        /// Divergence override: logbc, hellinger, or dpd.
        #[arg(long)]
        divergence: Option<String>,
        /// Density-power tuning parameter override.
        #[arg(long)]
        alpha: Option<f64>,
        /// JSON configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit the configured model and print its posterior summary.
    Fit {
        /// CSV file with a header row.
        #[arg(long)]
        data: PathBuf,
        /// Response column name.
        #[arg(long)]
        response: String,
        /// JSON configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::load(config.as_deref())?;
            if cfg.backend != Backend::Linear {
                anyhow::bail!(
                    "simulate always uses the linear backend; set \"backend\": \"linear\""
                );
            }
            let scenario = SimScenario {
                n: cfg.sim.n,
                p: cfg.sim.p,
                sigma2: cfg.sim.sigma2,
                contamination: ContaminationSpec {
                    frac: cfg.sim.outlier_frac,
                    perturb_sd: cfg.sim.resolved_perturb_sd(),
                },
                divergence: cfg.divergence_kind()?,
                n_test: cfg.sim.n_test,
                n_replicates: cfg.sim.n_replicates,
                n_draws: cfg.n_draws,
                seed: cfg.seed,
                config: cfg.cpp_config(),
                ig: cfg.ig_params(),
                convention: cfg.convention_or(ConventionChoice::PlugInShared),
            };
            let summary = run_scenario(&scenario).context("scenario failed")?;
            let files = emit_scenario(&summary, &cfg, &out)?;
            println!(
                "mean MLPD {:.4} (SE {:.4}), {:.0}% positive over {} replicates",
                summary.mean_mlpd,
                summary.se_mlpd,
                100.0 * summary.frac_positive,
                summary.replicates.len()
            );
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::SplitEval {
            data,
            response,
            outliers,
            config,
            out,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let table = load_csv(&data, &response)?;
            let rule = OutlierRule::from_str(&outliers)?;
            let outlier_indices = detect_outliers(&table.x, &table.y, &rule)?;
            if outlier_indices.is_empty() {
                anyhow::bail!(
                    "the rule '{outliers}' identified no outliers; the protocol needs at \
                     least one held-out outlier"
                );
            }
            let plan = SplitPlan {
                n_splits: cfg.split.n_splits,
                outlier_indices: outlier_indices.clone(),
                n_clean_test: cfg.split.n_clean_test,
                seed: cfg.seed,
            };
            let report = split_eval(&table, &plan, &cfg)?;
            let data_summary = DataSummary {
                path: data.display().to_string(),
                n: table.n(),
                p: table.p(),
                response: response.clone(),
                dropped_rows: table.dropped_rows.clone(),
                constant_columns: table.constant_columns.clone(),
                outlier_rows: outlier_indices.iter().map(|i| i + 1).collect(),
            };
            let files = emit_split_report(&report, &cfg, &data_summary, &out)?;
            println!(
                "mean MLPD {:.4} (SE {:.4}), {}/{} splits positive; gain clean {:.4}, \
                 gain outlier {:.4}",
                report.mean_mlpd,
                report.se_mlpd,
                report.n_positive,
                report.n_splits,
                report.pooled_gain_clean,
                report.pooled_gain_outlier
            );
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Predict {
            data,
            response,
            xnew,
            divergence,
            alpha,
            config,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if let Some(d) = divergence {
                cfg.divergence = d;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            cfg.validate()?;
            let table = load_csv(&data, &response)?;
            let xnew_raw = parse_xnew(&xnew, table.p())?;
            let report = predict_one(&table, &cfg, &xnew_raw)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Fit {
            data,
            response,
            config,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let table = load_csv(&data, &response)?;
            let report = fit_summary(&table, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
