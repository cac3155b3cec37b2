//! Run configuration: JSON-backed settings shared by every subcommand.

use std::env;
use std::fs;
use std::path::Path;

use cpp_core::conjugate::{BasisSpec, PriorSpec};
use cpp_core::divergence::DivergenceKind;
use cpp_core::gp::{KernelKind, KernelSpec};
use cpp_core::lab::MlpdConvention;
use cpp_core::solver::{CppConfig, DrawSummary, IgParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PredictError, Result};

/// Environment variable that, when set, overrides the configured seed.
pub const SEED_ENV_VAR: &str = "CPP_SEED";

/// Model backend selecting how covariates enter the predictive model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Conjugate Gaussian regression on the covariates as given.
    Linear,
    /// Conjugate Gaussian regression on a fixed basis expansion.
    Basis,
    /// Gaussian-process regression with a known noise variance.
    Gp,
}

/// Scoring convention for log-density comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionChoice {
    /// Gaussian scores for both predictors with a shared noise variance.
    PlugInShared,
    /// Mixture-of-draws score for the robust predictor.
    PosteriorMixture,
}

impl From<ConventionChoice> for MlpdConvention {
    fn from(c: ConventionChoice) -> Self {
        match c {
            ConventionChoice::PlugInShared => MlpdConvention::PlugInShared,
            ConventionChoice::PosteriorMixture => MlpdConvention::PosteriorMixture,
        }
    }
}

/// Synthetic-data scenario settings for the `simulate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Training sample size.
    pub n: usize,
    /// Number of covariates.
    pub p: usize,
    /// True noise variance of the generating process.
    pub sigma2: f64,
    /// Fraction of training responses to perturb.
    pub outlier_frac: f64,
    /// Perturbation scale; `null` means ten noise standard deviations.
    pub perturb_sd: Option<f64>,
    /// Clean test points per replicate.
    pub n_test: usize,
    /// Independent replicates.
    pub n_replicates: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n: 200,
            p: 6,
            sigma2: 1.0,
            outlier_frac: 0.05,
            perturb_sd: None,
            n_test: 50,
            n_replicates: 50,
        }
    }
}

impl SimSection {
    /// Perturbation scale with the ten-noise-sd default applied.
    pub fn resolved_perturb_sd(&self) -> f64 {
        self.perturb_sd.unwrap_or(10.0 * self.sigma2.sqrt())
    }
}

/// Repeated random-split settings for the `split-eval` subcommand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// Number of random splits.
    pub n_splits: usize,
    /// Clean observations drawn into each test set.
    pub n_clean_test: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            n_splits: 10,
            n_clean_test: 18,
        }
    }
}

/// Basis-expansion settings for the `basis` backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    /// One of `identity`, `polynomial`, `spline`.
    pub kind: String,
    /// Per-coordinate degree for the polynomial and spline bases.
    pub degree: usize,
    /// Fixed knot locations for the spline basis.
    pub knots: Vec<f64>,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self {
            kind: "polynomial".to_string(),
            degree: 2,
            knots: Vec::new(),
        }
    }
}

impl BasisSection {
    /// Converts to the model-layer basis description.
    pub fn to_spec(&self) -> Result<BasisSpec> {
        match self.kind.as_str() {
            "identity" => Ok(BasisSpec::Identity),
            "polynomial" => Ok(BasisSpec::Polynomial {
                degree: self.degree,
            }),
            "spline" => Ok(BasisSpec::TruncatedPowerSpline {
                degree: self.degree,
                knots: self.knots.clone(),
            }),
            other => Err(PredictError::Config(format!(
                "unknown basis kind '{other}' (expected identity, polynomial, or spline)"
            ))),
        }
    }
}

/// Kernel settings for the `gp` backend, which runs with a known noise
/// variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// One of `linear`, `squared_exponential`.
    pub kind: String,
    /// Prior signal variance.
    pub signal_var: f64,
    /// Length scale for the squared-exponential kernel.
    pub length_scale: f64,
    /// Known noise variance.
    pub sigma2: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            kind: "linear".to_string(),
            signal_var: 1.0,
            length_scale: 1.0,
            sigma2: 1.0,
        }
    }
}

impl KernelSection {
    /// Converts to the model-layer kernel description.
    pub fn to_spec(&self) -> Result<KernelSpec> {
        let kind = match self.kind.as_str() {
            "linear" => KernelKind::Linear,
            "squared_exponential" => KernelKind::SquaredExponential {
                length_scale: self.length_scale,
            },
            other => {
                return Err(PredictError::Config(format!(
                    "unknown kernel kind '{other}' (expected linear or squared_exponential)"
                )))
            }
        };
        Ok(KernelSpec {
            kind,
            signal_var: self.signal_var,
        })
    }
}

/// Complete run configuration; every field has a default, so an empty JSON
/// object (or no config file at all) is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Divergence driving the robust prediction: `logbc`, `hellinger`, `dpd`.
    pub divergence: String,
    /// Density-power tuning parameter.
    pub alpha: f64,
    /// Prior coefficient mean, broadcast across coordinates.
    pub beta0: f64,
    /// Prior coefficient scale: the prior covariance is `sigma2 * v_scale * I`.
    pub v_scale: f64,
    /// Inverse-gamma noise-prior shape.
    pub a0: f64,
    /// Inverse-gamma noise-prior scale.
    pub b0: f64,
    /// Posterior noise draws per fit.
    pub n_draws: usize,
    /// Grid length for the one-dimensional search.
    pub grid_len: usize,
    /// Search half-width in noise standard deviations.
    pub window_sd: f64,
    /// Base seed for every random stream.
    pub seed: u64,
    /// Model backend.
    pub backend: Backend,
    /// Scoring convention; `null` lets each command pick its default.
    pub convention: Option<ConventionChoice>,
    /// Settings for the `basis` backend.
    pub basis: BasisSection,
    /// Settings for the `gp` backend.
    pub kernel: KernelSection,
    /// Settings for the `simulate` subcommand.
    pub sim: SimSection,
    /// Settings for the `split-eval` subcommand.
    pub split: SplitSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            divergence: "dpd".to_string(),
            alpha: 1.0,
            beta0: 0.0,
            v_scale: 100.0,
            a0: 0.1,
            b0: 0.1,
            n_draws: 500,
            grid_len: 61,
            window_sd: 4.0,
            seed: 20240819,
            backend: Backend::Linear,
            convention: None,
            basis: BasisSection::default(),
            kernel: KernelSection::default(),
            sim: SimSection::default(),
            split: SplitSection::default(),
        }
    }
}

impl RunConfig {
    /// Loads the configuration from a JSON file, or the defaults when no
    /// path is given; the `CPP_SEED` environment variable overrides the seed
    /// in either case.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| PredictError::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| PredictError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Ok(raw) = env::var(SEED_ENV_VAR) {
            cfg.seed = raw.parse().map_err(|_| {
                PredictError::Config(format!(
                    "{SEED_ENV_VAR} must be an unsigned integer (got '{raw}')"
                ))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every numeric field's range.
    pub fn validate(&self) -> Result<()> {
        self.divergence_kind()?;
        for (name, value) in [
            ("v_scale", self.v_scale),
            ("a0", self.a0),
            ("b0", self.b0),
            ("window_sd", self.window_sd),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(PredictError::Config(format!(
                    "{name} must be positive (got {value})"
                )));
            }
        }
        if !self.beta0.is_finite() {
            return Err(PredictError::Config("beta0 must be finite".to_string()));
        }
        if self.n_draws == 0 {
            return Err(PredictError::Config(
                "n_draws must be positive".to_string(),
            ));
        }
        if self.grid_len < 5 || self.grid_len % 2 == 0 {
            return Err(PredictError::Config(format!(
                "grid_len must be odd and at least 5 (got {})",
                self.grid_len
            )));
        }
        if !(self.sim.sigma2.is_finite() && self.sim.sigma2 > 0.0) {
            return Err(PredictError::Config(format!(
                "sim.sigma2 must be positive (got {})",
                self.sim.sigma2
            )));
        }
        if !(0.0..1.0).contains(&self.sim.outlier_frac) {
            return Err(PredictError::Config(format!(
                "sim.outlier_frac must lie in [0, 1) (got {})",
                self.sim.outlier_frac
            )));
        }
        if self.split.n_splits == 0 || self.split.n_clean_test == 0 {
            return Err(PredictError::Config(
                "split.n_splits and split.n_clean_test must be positive".to_string(),
            ));
        }
        self.basis.to_spec()?;
        self.kernel.to_spec()?;
        Ok(())
    }

    /// Parses the divergence name and tuning parameter.
    pub fn divergence_kind(&self) -> Result<DivergenceKind> {
        let kind = match self.divergence.as_str() {
            "logbc" => DivergenceKind::LogBc,
            "hellinger" => DivergenceKind::Hellinger,
            "dpd" => DivergenceKind::Dpd { alpha: self.alpha },
            other => {
                return Err(PredictError::Config(format!(
                    "unknown divergence '{other}' (expected logbc, hellinger, or dpd)"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    /// Solver settings assembled from the search fields.
    pub fn cpp_config(&self) -> CppConfig {
        CppConfig {
            grid_len: self.grid_len,
            window_sd: self.window_sd,
            refine_tol: 1e-8,
            summary: DrawSummary::Mean,
        }
    }

    /// Noise-variance prior from the hyperparameter fields.
    pub fn ig_params(&self) -> IgParams {
        IgParams {
            shape: self.a0,
            scale: self.b0,
        }
    }

    /// Coefficient prior of the given dimension, unknown noise variance.
    pub fn prior(&self, p: usize) -> PriorSpec {
        PriorSpec {
            beta0: DVector::repeat(p, self.beta0),
            v: DMatrix::identity(p, p) * self.v_scale,
            sigma2: None,
        }
    }

    /// Scoring convention with a per-command fallback.
    pub fn convention_or(&self, fallback: ConventionChoice) -> MlpdConvention {
        self.convention.unwrap_or(fallback).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn empty_object_is_a_valid_config() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>("{\"grid_size\": 61}");
        assert!(err.is_err());
    }

    #[test]
    fn divergence_names_map_to_kinds() {
        let mut cfg = RunConfig::default();
        assert_eq!(
            cfg.divergence_kind().unwrap(),
            DivergenceKind::Dpd { alpha: 1.0 }
        );
        cfg.divergence = "hellinger".to_string();
        assert_eq!(cfg.divergence_kind().unwrap(), DivergenceKind::Hellinger);
        cfg.divergence = "logbc".to_string();
        assert_eq!(cfg.divergence_kind().unwrap(), DivergenceKind::LogBc);
        cfg.divergence = "kl".to_string();
        assert!(cfg.divergence_kind().is_err());
    }

    #[test]
    fn negative_alpha_is_rejected_for_dpd() {
        let cfg = RunConfig {
            alpha: -0.5,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn perturbation_defaults_to_ten_noise_sds() {
        let mut sim = SimSection::default();
        sim.sigma2 = 4.0;
        assert_eq!(sim.resolved_perturb_sd(), 20.0);
        sim.perturb_sd = Some(3.0);
        assert_eq!(sim.resolved_perturb_sd(), 3.0);
    }
}
