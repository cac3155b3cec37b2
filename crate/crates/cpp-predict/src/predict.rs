//! Single-point prediction and model-fit summaries for the CLI.
//!
//! Covariates and response are standardized on the full dataset before
//! fitting; predictions are mapped back to the response's original units
//! through the stored transform, which is echoed in every report.

use cpp_core::conjugate::{basis_expand, fit_posterior, swap_structure, Dataset};
use cpp_core::gp::gp_fit;
use cpp_core::solver::{
    draw_sigma2_posterior, gp_problem, sigma2_posterior_params, solve, solve_approach_i,
    CppProblem, CppTerm,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Backend, RunConfig};
use crate::error::{PredictError, Result};
use crate::io::{standardize, RegressionData, Transform};

/// Separates the prediction noise-draw stream from other seed consumers.
const PREDICT_DRAW_SALT: u64 = 0x7072_6564_6963_7421;

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Parses a comma-separated covariate row in the file's original units.
pub fn parse_xnew(raw: &str, expected_len: usize) -> Result<DVector<f64>> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != expected_len {
        return Err(PredictError::Argument(format!(
            "xnew has {} values but the data has {} covariates",
            parts.len(),
            expected_len
        )));
    }
    let mut values = Vec::with_capacity(parts.len());
    for part in parts {
        let v: f64 = part.trim().parse().map_err(|_| {
            PredictError::Argument(format!("xnew entry '{part}' is not a number"))
        })?;
        if !v.is_finite() {
            return Err(PredictError::Argument(format!(
                "xnew entry '{part}' is not finite"
            )));
        }
        values.push(v);
    }
    Ok(DVector::from_vec(values))
}

/// Outcome of a single robust prediction.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionReport {
    /// Robust prediction in the response's original units.
    pub prediction: f64,
    /// Robust prediction on the standardized scale the model works in.
    pub prediction_standardized: f64,
    /// Plug-in prediction in original units.
    pub map_prediction: f64,
    /// Plug-in prediction on the standardized scale.
    pub map_prediction_standardized: f64,
    /// Divergence name as configured.
    pub divergence: String,
    /// Density-power tuning parameter (meaningful for `dpd`).
    pub alpha: f64,
    /// Model backend used.
    pub backend: Backend,
    /// Noise draws entering the summary (1 for the known-variance backend).
    pub n_draws_used: usize,
    /// Draws excluded because their search hit the window boundary.
    pub boundary_draws: usize,
    /// Whether every contributing solve converged.
    pub converged: bool,
    /// Seed governing the noise draws.
    pub seed: u64,
    /// Complete observations used.
    pub n: usize,
    /// Model dimension after any basis expansion.
    pub p: usize,
    /// 1-based observation numbers dropped for missing cells.
    pub dropped_rows: Vec<usize>,
    /// The fitted standardization, enabling external back-transformation.
    pub transform: Transform,
}

/// Robust prediction at one covariate row given in original units.
pub fn predict_one(data: &RegressionData, cfg: &RunConfig, xnew_raw: &DVector<f64>) -> Result<PredictionReport> {
    if xnew_raw.len() != data.p() {
        return Err(PredictError::Argument(format!(
            "xnew has {} values but the data has {} covariates",
            xnew_raw.len(),
            data.p()
        )));
    }
    let divergence = cfg.divergence_kind()?;
    let (std_data, transform) = standardize(data)?;
    let x_new_std = transform.apply_row(xnew_raw);

    match cfg.backend {
        Backend::Gp => {
            let kernel = cfg.kernel.to_spec()?;
            let train = Dataset::new(std_data.x.clone(), std_data.y.clone())?;
            let model = gp_fit(&train, &kernel, 0.0, cfg.kernel.sigma2)?;
            let problem = gp_problem(&model, &x_new_std, divergence)?;
            let map_std = problem.map_prediction;
            let solution = solve(&problem, &cfg.cpp_config())?;
            Ok(PredictionReport {
                prediction: transform.invert_y(solution.a_star),
                prediction_standardized: solution.a_star,
                map_prediction: transform.invert_y(map_std),
                map_prediction_standardized: map_std,
                divergence: cfg.divergence.clone(),
                alpha: cfg.alpha,
                backend: cfg.backend,
                n_draws_used: 1,
                boundary_draws: usize::from(solution.boundary),
                converged: solution.converged,
                seed: cfg.seed,
                n: train.n(),
                p: train.p(),
                dropped_rows: data.dropped_rows.clone(),
                transform,
            })
        }
        Backend::Linear | Backend::Basis => {
            let (x_model, x_new_model) = expand_for_backend(cfg, &std_data.x, &x_new_std)?;
            let train = Dataset::new(x_model, std_data.y.clone())?;
            let prior = cfg.prior(train.p());
            let state = fit_posterior(&train, &prior)?;
            let ig_post = sigma2_posterior_params(&state, &train, &prior, &cfg.ig_params())?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, PREDICT_DRAW_SALT));
            let draws = draw_sigma2_posterior(&ig_post, cfg.n_draws, &mut rng)?;

            let structure = swap_structure(&state, &train, &x_new_model)?;
            let build = |s2: f64| -> cpp_core::Result<CppProblem> {
                let terms = structure
                    .terms
                    .iter()
                    .map(|term| {
                        let loo = term.loo_at(s2);
                        let swap = term.swap_at(s2);
                        CppTerm {
                            m2: loo.m2,
                            s2_sq: loo.s2_sq,
                            c: swap.c,
                            d: swap.d,
                            s1_sq: swap.s1_sq,
                        }
                    })
                    .collect();
                CppProblem::new(terms, divergence, structure.map_prediction, s2.sqrt())
            };
            let result = solve_approach_i(&build, &draws, &cfg.cpp_config())?;
            let converged = result
                .draw_solutions
                .iter()
                .filter(|s| !s.boundary)
                .all(|s| s.converged);
            Ok(PredictionReport {
                prediction: transform.invert_y(result.a_hat),
                prediction_standardized: result.a_hat,
                map_prediction: transform.invert_y(structure.map_prediction),
                map_prediction_standardized: structure.map_prediction,
                divergence: cfg.divergence.clone(),
                alpha: cfg.alpha,
                backend: cfg.backend,
                n_draws_used: result.n_used,
                boundary_draws: result.n_boundary,
                converged,
                seed: cfg.seed,
                n: train.n(),
                p: train.p(),
                dropped_rows: data.dropped_rows.clone(),
                transform,
            })
        }
    }
}

fn expand_for_backend(
    cfg: &RunConfig,
    x_std: &DMatrix<f64>,
    x_new_std: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    match cfg.backend {
        Backend::Basis => {
            let spec = cfg.basis.to_spec()?;
            let train = basis_expand(x_std, &spec)?;
            let new_row = DMatrix::from_rows(&[x_new_std.transpose()]);
            let expanded = basis_expand(&new_row, &spec)?;
            Ok((train.z, expanded.z.row(0).transpose()))
        }
        _ => Ok((x_std.clone(), x_new_std.clone())),
    }
}

/// Noise-variance posterior echoed by `fit`.
#[derive(Debug, Clone, Serialize)]
pub struct NoisePosterior {
    /// Inverse-gamma shape after the conjugate update.
    pub shape: f64,
    /// Inverse-gamma scale after the conjugate update.
    pub scale: f64,
    /// Posterior mean `scale/(shape−1)` when the shape exceeds one.
    pub mean: Option<f64>,
}

/// Model summary printed by the `fit` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    /// Model backend used.
    pub backend: Backend,
    /// Complete observations used.
    pub n: usize,
    /// Model dimension after any basis expansion.
    pub p: usize,
    /// Response column name.
    pub response: String,
    /// Posterior coefficient means on the standardized scale; absent for
    /// the function-space backend.
    pub coefficients: Option<Vec<f64>>,
    /// Largest training leverage; absent for the function-space backend.
    pub max_leverage: Option<f64>,
    /// Noise posterior; absent for the known-variance backend.
    pub noise_posterior: Option<NoisePosterior>,
    /// Known noise variance for the function-space backend.
    pub known_sigma2: Option<f64>,
    /// 1-based observation numbers dropped for missing cells.
    pub dropped_rows: Vec<usize>,
    /// Names of constant columns.
    pub constant_columns: Vec<String>,
    /// The fitted standardization.
    pub transform: Transform,
}

/// Fits the configured model and summarizes its posterior.
pub fn fit_summary(data: &RegressionData, cfg: &RunConfig) -> Result<FitReport> {
    let (std_data, transform) = standardize(data)?;
    match cfg.backend {
        Backend::Gp => {
            let kernel = cfg.kernel.to_spec()?;
            let train = Dataset::new(std_data.x.clone(), std_data.y.clone())?;
            gp_fit(&train, &kernel, 0.0, cfg.kernel.sigma2)?;
            Ok(FitReport {
                backend: cfg.backend,
                n: train.n(),
                p: train.p(),
                response: data.response.clone(),
                coefficients: None,
                max_leverage: None,
                noise_posterior: None,
                known_sigma2: Some(cfg.kernel.sigma2),
                dropped_rows: data.dropped_rows.clone(),
                constant_columns: data.constant_columns.clone(),
                transform,
            })
        }
        Backend::Linear | Backend::Basis => {
            let x_model = match cfg.backend {
                Backend::Basis => basis_expand(&std_data.x, &cfg.basis.to_spec()?)?.z,
                _ => std_data.x.clone(),
            };
            let train = Dataset::new(x_model, std_data.y.clone())?;
            let prior = cfg.prior(train.p());
            let state = fit_posterior(&train, &prior)?;
            let ig_post = sigma2_posterior_params(&state, &train, &prior, &cfg.ig_params())?;
            let mean = (ig_post.shape > 1.0).then(|| ig_post.scale / (ig_post.shape - 1.0));
            Ok(FitReport {
                backend: cfg.backend,
                n: train.n(),
                p: train.p(),
                response: data.response.clone(),
                coefficients: Some(state.beta_hat().iter().copied().collect()),
                max_leverage: Some(state.leverages().max()),
                noise_posterior: Some(NoisePosterior {
                    shape: ig_post.shape,
                    scale: ig_post.scale,
                    mean,
                }),
                known_sigma2: None,
                dropped_rows: data.dropped_rows.clone(),
                constant_columns: data.constant_columns.clone(),
                transform,
            })
        }
    }
}
