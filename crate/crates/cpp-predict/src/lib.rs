//! Command-line layer for robust conjugate-regression prediction: JSON
//! configuration, CSV ingestion with standardization, explicit outlier
//! rules, the repeated random-split evaluation protocol, single-point
//! prediction, and flat-file result emission.
//!
//! Module map:
//! * [`config`] — JSON-backed run configuration shared by every subcommand;
//! * [`io`] — CSV loading, missing-row handling, and standardization;
//! * [`splits`] — outlier rules and the repeated random-split plan;
//! * [`eval`] — the split-evaluation engine scoring robust against plug-in
//!   predictions on held-out rows;
//! * [`predict`] — single-point prediction and model-fit summaries;
//! * [`emit`] — `summary.json` and CSV table writers with locked schemas.

pub mod config;
pub mod emit;
pub mod error;
pub mod eval;
pub mod io;
pub mod predict;
pub mod splits;

pub use config::RunConfig;
pub use error::{PredictError, Result};
