//! Synthetic-data generation, response contamination, and the evaluation
//! harness comparing the divergence-matching predictor with the plug-in
//! posterior-mean predictor.
//!
//! The generating process draws covariates as independent standard normals,
//! responses from a fixed sparse coefficient pattern plus Gaussian noise,
//! and a fresh clean test set per replicate. Contamination perturbs an
//! exact floor-fraction of training responses by scaled standard-normal
//! shifts; the scaling is applied to pre-drawn standard draws so that runs
//! differing only in magnitude corrupt the same rows by proportional
//! amounts. Covariate columns are standardized after contamination using
//! training statistics, which are then applied to the test covariates.
//!
//! Evaluation is by mean log predictive density difference (robust minus
//! plug-in) over the clean test points, under one of two scoring
//! conventions: a shared plug-in Gaussian with the posterior-mean noise
//! variance on both sides, or a posterior-mixture density for the robust
//! predictor against the plug-in Gaussian.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::conjugate::{fit_posterior, swap_structure, Dataset, PriorSpec};
use crate::divergence::{DivergenceKind, GaussianLaw};
use crate::error::{CppError, Result};
use crate::solver::{
    draw_sigma2_posterior, sigma2_posterior_params, solve, solve_approach_i, CppConfig,
    CppProblem, CppTerm, IgParams,
};

/// How the robust predictor is scored against the plug-in predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpdConvention {
    /// Both predictors are scored as Gaussians with the same posterior-mean
    /// noise variance; only the centers differ.
    PlugInShared,
    /// The robust predictor is scored as an equal-weight mixture of
    /// per-draw Gaussians; the plug-in keeps the shared Gaussian.
    PosteriorMixture,
}

/// Response contamination: perturb an exact floor fraction of training
/// responses by `perturb_sd` times a standard normal draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationSpec {
    /// Fraction of training responses to perturb, in `[0, 1)`.
    pub frac: f64,
    /// Standard deviation of the additive perturbation.
    pub perturb_sd: f64,
}

impl ContaminationSpec {
    /// No contamination.
    pub fn clean() -> Self {
        Self {
            frac: 0.0,
            perturb_sd: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.frac.is_finite() && (0.0..1.0).contains(&self.frac)) {
            return Err(CppError::InvalidArgument(format!(
                "contamination fraction must lie in [0, 1) (got {})",
                self.frac
            )));
        }
        if !(self.perturb_sd.is_finite() && self.perturb_sd >= 0.0) {
            return Err(CppError::InvalidArgument(format!(
                "perturbation scale must be non-negative (got {})",
                self.perturb_sd
            )));
        }
        Ok(())
    }
}

/// Full specification of one simulation scenario.
#[derive(Debug, Clone)]
pub struct SimScenario {
    /// Training sample size.
    pub n: usize,
    /// Number of covariates.
    pub p: usize,
    /// True noise variance of the generating process.
    pub sigma2: f64,
    /// Contamination applied to the training responses.
    pub contamination: ContaminationSpec,
    /// Divergence driving the robust predictor.
    pub divergence: DivergenceKind,
    /// Number of clean test points per replicate.
    pub n_test: usize,
    /// Number of independent replicates.
    pub n_replicates: usize,
    /// Number of posterior noise-variance draws per replicate.
    pub n_draws: usize,
    /// Base seed; replicates use separate streams of the same generator.
    pub seed: u64,
    /// Solver configuration.
    pub config: CppConfig,
    /// Prior on the unknown noise variance.
    pub ig: IgParams,
    /// Scoring convention for the log-density comparison.
    pub convention: MlpdConvention,
}

impl SimScenario {
    /// Scenario with harness defaults: 50 test points, 500 draws, default
    /// solver configuration, weak noise prior, shared plug-in scoring.
    pub fn new(
        n: usize,
        p: usize,
        sigma2: f64,
        contamination: ContaminationSpec,
        divergence: DivergenceKind,
        n_replicates: usize,
        seed: u64,
    ) -> Self {
        Self {
            n,
            p,
            sigma2,
            contamination,
            divergence,
            n_test: 50,
            n_replicates,
            n_draws: 500,
            seed,
            config: CppConfig::default(),
            ig: IgParams::default(),
            convention: MlpdConvention::PlugInShared,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 4 || self.p == 0 {
            return Err(CppError::InvalidArgument(format!(
                "scenario needs n >= 4 and p >= 1 (got n {}, p {})",
                self.n, self.p
            )));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(CppError::InvalidArgument(format!(
                "true noise variance must be positive (got {})",
                self.sigma2
            )));
        }
        if self.n_test == 0 || self.n_replicates == 0 || self.n_draws == 0 {
            return Err(CppError::InvalidArgument(
                "test points, replicates, and draws must all be positive".into(),
            ));
        }
        self.contamination.validate()?;
        self.divergence.validate()
    }
}

/// Sparse coefficient pattern `(1, -1, 0.5, 0, ...)`, truncated or padded.
pub fn default_beta(p: usize) -> DVector<f64> {
    DVector::from_fn(p, |j, _| match j {
        0 => 1.0,
        1 => -1.0,
        2 => 0.5,
        _ => 0.0,
    })
}

/// One replicate's generated training and test data, before contamination.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    /// Clean training data.
    pub data: Dataset,
    /// Test covariates, one row per test point.
    pub x_test: DMatrix<f64>,
    /// Clean test responses.
    pub y_test: DVector<f64>,
    /// Generating coefficients.
    pub beta: DVector<f64>,
}

/// Generates one replicate's data: covariates are independent standard
/// normals (drawn row-major), responses add `sqrt(sigma2)` noise.
///
/// The base seed selects the generator; the replicate index selects an
/// independent stream, so replicates are reproducible individually.
pub fn generate_data(sc: &SimScenario, replicate: u64) -> Result<GeneratedData> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(replicate);
    let beta = default_beta(sc.p);
    let sd = sc.sigma2.sqrt();
    let (x, y) = draw_design(&mut rng, sc.n, sc.p, &beta, sd);
    let (x_test, y_test) = draw_design(&mut rng, sc.n_test, sc.p, &beta, sd);
    Ok(GeneratedData {
        data: Dataset::new(x, y)?,
        x_test,
        y_test,
        beta,
    })
}

fn draw_design(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    beta: &DVector<f64>,
    noise_sd: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            x[(r, c)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut y = &x * beta;
    for r in 0..rows {
        y[r] += noise_sd * rng.sample::<f64, _>(StandardNormal);
    }
    (x, y)
}

/// A contaminated dataset with the perturbed row indices.
#[derive(Debug, Clone)]
pub struct Contaminated {
    /// Training data with perturbed responses.
    pub data: Dataset,
    /// Sorted indices of the perturbed rows.
    pub outlier_indices: Vec<usize>,
}

/// Perturbs exactly `floor(frac * n)` responses, chosen without replacement.
///
/// The standard-normal shift per chosen row is drawn first and scaled by
/// `perturb_sd` afterwards, so two runs differing only in scale perturb the
/// same rows proportionally.
pub fn contaminate(data: &Dataset, spec: &ContaminationSpec, seed: u64) -> Result<Contaminated> {
    spec.validate()?;
    let n = data.n();
    let k = (spec.frac * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, n, k).into_vec();
    indices.sort_unstable();
    let mut y = data.y().clone();
    for &i in &indices {
        let shift: f64 = rng.sample(StandardNormal);
        y[i] += spec.perturb_sd * shift;
    }
    Ok(Contaminated {
        data: Dataset::new(data.x().clone(), y)?,
        outlier_indices: indices,
    })
}

/// Per-column location/scale transform fitted on training covariates.
#[derive(Debug, Clone)]
pub struct ColumnTransform {
    /// Column means of the fitting matrix.
    pub means: DVector<f64>,
    /// Column sample standard deviations (denominator `n - 1`).
    pub sds: DVector<f64>,
}

impl ColumnTransform {
    /// Fits means and sample standard deviations column by column.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(CppError::InvalidArgument(
                "standardization needs at least two rows".into(),
            ));
        }
        let n = x.nrows() as f64;
        let means = DVector::from_fn(x.ncols(), |c, _| x.column(c).sum() / n);
        let sds = DVector::from_fn(x.ncols(), |c, _| {
            let m = means[c];
            (x.column(c).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        if let Some(c) = sds.iter().position(|&s| s < 1e-12) {
            return Err(CppError::InvalidArgument(format!(
                "column {c} has (near-)zero variance and cannot be standardized"
            )));
        }
        Ok(Self { means, sds })
    }

    /// Applies the fitted transform to a matrix with matching column count.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(CppError::DimensionMismatch(format!(
                "transform fitted on {} columns applied to {} columns",
                self.means.len(),
                x.ncols()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.means[c]) / self.sds[c]
        }))
    }
}

/// Mean difference of two log predictive density sequences.
pub fn mlpd(log_p_robust: &[f64], log_p_reference: &[f64]) -> Result<f64> {
    if log_p_robust.len() != log_p_reference.len() || log_p_robust.is_empty() {
        return Err(CppError::DimensionMismatch(format!(
            "log density sequences must be non-empty and equal length ({} vs {})",
            log_p_robust.len(),
            log_p_reference.len()
        )));
    }
    let total: f64 = log_p_robust
        .iter()
        .zip(log_p_reference)
        .map(|(a, b)| a - b)
        .sum();
    Ok(total / log_p_robust.len() as f64)
}

/// Log-density of an equal-weight Gaussian mixture, via log-sum-exp.
pub fn log_mixture_gaussian(y: f64, means: &[f64], vars: &[f64]) -> Result<f64> {
    if means.len() != vars.len() || means.is_empty() {
        return Err(CppError::DimensionMismatch(
            "mixture needs matching, non-empty means and variances".into(),
        ));
    }
    let mut logs = Vec::with_capacity(means.len());
    for (&m, &v) in means.iter().zip(vars) {
        logs.push(GaussianLaw::new(m, v)?.log_pdf(y));
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok(max + (sum / logs.len() as f64).ln())
}

/// Solver health counters accumulated over one replicate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplicateDiagnostics {
    /// Posterior draws whose per-draw search hit the window boundary,
    /// summed over test points.
    pub boundary_draws: usize,
    /// Per-draw solutions whose gaps left a convexity interval, summed over
    /// test points.
    pub convexity_violations: usize,
    /// Test points where the robust solve failed and the plug-in prediction
    /// was substituted.
    pub solver_failures: usize,
}

/// One replicate's evaluation outcome.
#[derive(Debug, Clone)]
pub struct ReplicateResult {
    /// Mean log predictive density difference (robust minus plug-in) over
    /// the test points.
    pub mlpd: f64,
    /// True when the difference is strictly positive.
    pub cpp_positive: bool,
    /// Robust prediction at the first test point.
    pub a_star: f64,
    /// Plug-in prediction at the first test point.
    pub map_pred: f64,
    /// Solver health counters.
    pub diagnostics: ReplicateDiagnostics,
}

/// Aggregate over a scenario's replicates.
#[derive(Debug, Clone)]
pub struct ScenarioSummary {
    /// Per-replicate outcomes, in replicate order.
    pub replicates: Vec<ReplicateResult>,
    /// Mean of the per-replicate differences.
    pub mean_mlpd: f64,
    /// Standard error of the mean (zero for a single replicate).
    pub se_mlpd: f64,
    /// Lower end of the 95% normal-approximation interval.
    pub ci_lower: f64,
    /// Upper end of the 95% normal-approximation interval.
    pub ci_upper: f64,
    /// Fraction of replicates with a strictly positive difference.
    pub frac_positive: f64,
}

const NOISE_DRAW_SALT: u64 = 0x6e6f_6973_655f_7364; // distinct stream for posterior draws
const CONTAMINATION_SALT: u64 = 0x636f_6e74_616d_0000; // distinct seeds for contamination

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs every replicate of a scenario and aggregates the outcomes.
///
/// Each replicate: generate, contaminate, standardize covariates on the
/// contaminated training set, fit the diffuse conjugate posterior, sample
/// the noise-variance posterior, and solve the criterion per draw at every
/// test point (summarizing the non-boundary draws). Failed test points fall
/// back to the plug-in prediction and are counted, contributing a zero
/// difference rather than aborting the replicate.
pub fn run_scenario(sc: &SimScenario) -> Result<ScenarioSummary> {
    sc.validate()?;
    let mut replicates = Vec::with_capacity(sc.n_replicates);
    for r in 0..sc.n_replicates {
        replicates.push(run_replicate(sc, r as u64)?);
    }
    let diffs: Vec<f64> = replicates.iter().map(|r| r.mlpd).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let se = if diffs.len() > 1 {
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (diffs.len() - 1) as f64;
        (var / diffs.len() as f64).sqrt()
    } else {
        0.0
    };
    let frac_positive =
        replicates.iter().filter(|r| r.cpp_positive).count() as f64 / replicates.len() as f64;
    Ok(ScenarioSummary {
        mean_mlpd: mean,
        se_mlpd: se,
        ci_lower: mean - 1.96 * se,
        ci_upper: mean + 1.96 * se,
        frac_positive,
        replicates,
    })
}

fn run_replicate(sc: &SimScenario, replicate: u64) -> Result<ReplicateResult> {
    let generated = generate_data(sc, replicate)?;
    let contaminated = contaminate(
        &generated.data,
        &sc.contamination,
        mix_seed(sc.seed, CONTAMINATION_SALT ^ replicate),
    )?;
    let transform = ColumnTransform::fit(contaminated.data.x())?;
    let x_train = transform.apply(contaminated.data.x())?;
    let x_test = transform.apply(&generated.x_test)?;
    let data = Dataset::new(x_train, contaminated.data.y().clone())?;

    let prior = PriorSpec::diffuse(sc.p);
    let state = fit_posterior(&data, &prior)?;
    let ig_post = sigma2_posterior_params(&state, &data, &prior, &sc.ig)?;
    let mut draw_rng = ChaCha8Rng::seed_from_u64(mix_seed(sc.seed, NOISE_DRAW_SALT));
    draw_rng.set_stream(replicate);
    let draws = draw_sigma2_posterior(&ig_post, sc.n_draws, &mut draw_rng)?;
    let sigma_bar = draws.iter().sum::<f64>() / draws.len() as f64;

    let mut diagnostics = ReplicateDiagnostics::default();
    let mut log_p_robust = Vec::with_capacity(sc.n_test);
    let mut log_p_plug = Vec::with_capacity(sc.n_test);
    let mut first_a_star = 0.0;
    let mut first_map = 0.0;
    for j in 0..sc.n_test {
        let x_new = x_test.row(j).transpose();
        let structure = swap_structure(&state, &data, &x_new)?;
        let map_pred = structure.map_prediction;
        let shared_var = sigma_bar * (1.0 + structure.lev_new);
        let build = |s2: f64| -> Result<CppProblem> {
            let terms = structure
                .terms
                .iter()
                .map(|t| {
                    let loo = t.loo_at(s2);
                    let swap = t.swap_at(s2);
                    CppTerm {
                        m2: loo.m2,
                        s2_sq: loo.s2_sq,
                        c: swap.c,
                        d: swap.d,
                        s1_sq: swap.s1_sq,
                    }
                })
                .collect();
            CppProblem::new(terms, sc.divergence, structure.map_prediction, s2.sqrt())
        };
        let y_j = generated.y_test[j];
        let plug_lp = GaussianLaw::new(map_pred, shared_var)?.log_pdf(y_j);
        let (robust_pred, robust_lp) = match solve_approach_i(&build, &draws, &sc.config) {
            Ok(result) => {
                diagnostics.boundary_draws += result.n_boundary;
                diagnostics.convexity_violations += result
                    .draw_solutions
                    .iter()
                    .filter(|s| !s.convexity_ok)
                    .count();
                let lp = match sc.convention {
                    MlpdConvention::PlugInShared => {
                        GaussianLaw::new(result.a_hat, shared_var)?.log_pdf(y_j)
                    }
                    MlpdConvention::PosteriorMixture => {
                        let mut means = Vec::with_capacity(result.n_used);
                        let mut vars = Vec::with_capacity(result.n_used);
                        for (t, sol) in result.draw_solutions.iter().enumerate() {
                            if !sol.boundary {
                                means.push(sol.a_star);
                                vars.push(draws[t] * (1.0 + structure.lev_new));
                            }
                        }
                        log_mixture_gaussian(y_j, &means, &vars)?
                    }
                };
                (result.a_hat, lp)
            }
            Err(_) => {
                diagnostics.solver_failures += 1;
                (map_pred, plug_lp)
            }
        };
        if j == 0 {
            first_a_star = robust_pred;
            first_map = map_pred;
        }
        log_p_robust.push(robust_lp);
        log_p_plug.push(plug_lp);
    }
    let diff = mlpd(&log_p_robust, &log_p_plug)?;
    Ok(ReplicateResult {
        mlpd: diff,
        cpp_positive: diff > 0.0,
        a_star: first_a_star,
        map_pred: first_map,
        diagnostics,
    })
}

/// Predictions along a sweep of single-response corruptions.
#[derive(Debug, Clone)]
pub struct InfluenceSweep {
    /// Replacement values for the swept response, in input order.
    pub magnitudes: Vec<f64>,
    /// Robust prediction at each magnitude.
    pub robust: Vec<f64>,
    /// Whether the robust solve stopped on the search-window edge.
    pub robust_boundary: Vec<bool>,
    /// Plug-in prediction at each magnitude.
    pub plug_in: Vec<f64>,
    /// Robust prediction on the unmodified data.
    pub baseline_robust: f64,
    /// Plug-in prediction on the unmodified data.
    pub baseline_plug_in: f64,
}

/// Replaces one training response by each listed value in turn and records
/// both predictors at a fixed query point.
///
/// The search window stays anchored at the unmodified data's plug-in
/// prediction, so the robust predictor is measured against a fixed frame
/// while the plug-in one drifts with the corruption; per-point boundary
/// flags tell interior minima apart from window-edge stops. A corrupted
/// response shifts every leave-one-out predictive through the posterior,
/// not only its own term, so the criterion's unwindowed minimizer is not
/// bounded in the corruption size; the anchored frame makes the sweep a
/// measurement of how hard the criterion pulls away from the clean fit.
pub fn influence_sweep(
    data: &Dataset,
    prior: &PriorSpec,
    x_new: &DVector<f64>,
    j: usize,
    magnitudes: &[f64],
    divergence: DivergenceKind,
    config: &CppConfig,
) -> Result<InfluenceSweep> {
    let sigma2 = prior.sigma2.ok_or_else(|| {
        CppError::InvalidArgument("influence sweep requires a known noise variance".into())
    })?;
    if j >= data.n() {
        return Err(CppError::InvalidArgument(format!(
            "row index {j} out of range for {} observations",
            data.n()
        )));
    }
    let solve_at = |dataset: &Dataset, anchor: Option<f64>| -> Result<(f64, bool, f64)> {
        let state = fit_posterior(dataset, prior)?;
        let mut problem =
            crate::solver::conjugate_problem(&state, dataset, x_new, sigma2, divergence)?;
        let plug = problem.map_prediction;
        if let Some(center) = anchor {
            problem.map_prediction = center;
        }
        let solution = solve(&problem, config)?;
        Ok((solution.a_star, solution.boundary, plug))
    };
    let (baseline_robust, _, baseline_plug_in) = solve_at(data, None)?;
    let mut robust = Vec::with_capacity(magnitudes.len());
    let mut robust_boundary = Vec::with_capacity(magnitudes.len());
    let mut plug_in = Vec::with_capacity(magnitudes.len());
    for &m in magnitudes {
        if !m.is_finite() {
            return Err(CppError::InvalidArgument(
                "replacement responses must be finite".into(),
            ));
        }
        let corrupted = data.with_response(j, m)?;
        let (r, b, p) = solve_at(&corrupted, Some(baseline_plug_in))?;
        robust.push(r);
        robust_boundary.push(b);
        plug_in.push(p);
    }
    Ok(InfluenceSweep {
        magnitudes: magnitudes.to_vec(),
        robust,
        robust_boundary,
        plug_in,
        baseline_robust,
        baseline_plug_in,
    })
}

/// Runs the same scenario at several contamination magnitudes with shared
/// seeds, so the returned summaries differ only through the perturbation
/// scale.
pub fn elpd_probe(sc: &SimScenario, perturb_sds: &[f64]) -> Result<Vec<ScenarioSummary>> {
    if perturb_sds.is_empty() {
        return Err(CppError::InvalidArgument(
            "at least one perturbation scale is required".into(),
        ));
    }
    let mut out = Vec::with_capacity(perturb_sds.len());
    for &sd in perturb_sds {
        let mut scenario = sc.clone();
        scenario.contamination = ContaminationSpec {
            frac: sc.contamination.frac,
            perturb_sd: sd,
        };
        out.push(run_scenario(&scenario)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_scenario() -> SimScenario {
        let mut sc = SimScenario::new(
            40,
            2,
            1.0,
            ContaminationSpec {
                frac: 0.1,
                perturb_sd: 10.0,
            },
            DivergenceKind::Dpd { alpha: 1.0 },
            3,
            42,
        );
        sc.n_test = 8;
        sc.n_draws = 25;
        sc
    }

    #[test]
    fn coefficient_pattern_truncates_and_pads() {
        assert_eq!(default_beta(2).as_slice(), &[1.0, -1.0]);
        assert_eq!(default_beta(5).as_slice(), &[1.0, -1.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn generation_is_reproducible_and_streams_are_independent() {
        let sc = tiny_scenario();
        let a = generate_data(&sc, 0).unwrap();
        let b = generate_data(&sc, 0).unwrap();
        assert_eq!(a.data.x(), b.data.x());
        assert_eq!(a.data.y(), b.data.y());
        assert_eq!(a.x_test, b.x_test);
        let c = generate_data(&sc, 1).unwrap();
        assert_ne!(a.data.x(), c.data.x());
        assert_eq!(a.data.n(), 40);
        assert_eq!(a.data.p(), 2);
        assert_eq!(a.x_test.nrows(), 8);
        assert_eq!(a.y_test.len(), 8);
    }

    #[test]
    fn responses_follow_the_coefficients_when_noise_vanishes() {
        let mut sc = tiny_scenario();
        sc.sigma2 = 1e-12;
        let g = generate_data(&sc, 0).unwrap();
        let fitted = g.data.x() * &g.beta;
        for i in 0..g.data.n() {
            assert!((g.data.y()[i] - fitted[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn contamination_perturbs_exactly_the_floor_fraction() {
        let sc = tiny_scenario();
        let g = generate_data(&sc, 0).unwrap();
        let spec = ContaminationSpec {
            frac: 0.1,
            perturb_sd: 5.0,
        };
        let cont = contaminate(&g.data, &spec, 7).unwrap();
        assert_eq!(cont.outlier_indices.len(), 4); // floor(0.1 * 40)
        let mut sorted = cont.outlier_indices.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert_eq!(cont.data.x(), g.data.x());
        for i in 0..g.data.n() {
            let changed = cont.data.y()[i] != g.data.y()[i];
            assert_eq!(changed, cont.outlier_indices.contains(&i));
        }
        let clean = contaminate(&g.data, &ContaminationSpec::clean(), 7).unwrap();
        assert!(clean.outlier_indices.is_empty());
        assert_eq!(clean.data.y(), g.data.y());
    }

    #[test]
    fn contamination_scales_linearly_in_the_perturbation_scale() {
        let sc = tiny_scenario();
        let g = generate_data(&sc, 0).unwrap();
        let small = contaminate(
            &g.data,
            &ContaminationSpec {
                frac: 0.1,
                perturb_sd: 1.0,
            },
            99,
        )
        .unwrap();
        let large = contaminate(
            &g.data,
            &ContaminationSpec {
                frac: 0.1,
                perturb_sd: 10.0,
            },
            99,
        )
        .unwrap();
        assert_eq!(small.outlier_indices, large.outlier_indices);
        for &i in &small.outlier_indices {
            let d_small = small.data.y()[i] - g.data.y()[i];
            let d_large = large.data.y()[i] - g.data.y()[i];
            assert_abs_diff_eq!(d_large, 10.0 * d_small, epsilon = 1e-12);
        }
    }

    #[test]
    fn column_transform_standardizes_training_and_reuses_stats_on_test() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]);
        let t = ColumnTransform::fit(&x).unwrap();
        let z = t.apply(&x).unwrap();
        for c in 0..2 {
            let mean = z.column(c).sum() / 4.0;
            let var = z.column(c).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
        }
        // Test rows use the training statistics, not their own.
        let fresh = DMatrix::from_row_slice(1, 2, &[2.5, 25.0]);
        let zf = t.apply(&fresh).unwrap();
        assert_abs_diff_eq!(zf[(0, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(zf[(0, 1)], 0.0, epsilon = 1e-12);
        let constant = DMatrix::from_row_slice(3, 1, &[2.0, 2.0, 2.0]);
        assert!(ColumnTransform::fit(&constant).is_err());
    }

    #[test]
    fn mean_log_density_difference_hand_value() {
        let robust = [-(1.0_f64), -2.0];
        let plug = [-1.5, -2.5];
        assert_abs_diff_eq!(mlpd(&robust, &plug).unwrap(), 0.5, epsilon = 1e-15);
        assert!(mlpd(&robust, &plug[..1]).is_err());
    }

    #[test]
    fn mixture_log_density_reduces_to_a_single_gaussian() {
        let direct = GaussianLaw::new(0.4, 1.3).unwrap().log_pdf(0.9);
        assert_abs_diff_eq!(
            log_mixture_gaussian(0.9, &[0.4], &[1.3]).unwrap(),
            direct,
            epsilon = 1e-15
        );
        // Equal components collapse to the common density.
        assert_abs_diff_eq!(
            log_mixture_gaussian(0.9, &[0.4, 0.4], &[1.3, 1.3]).unwrap(),
            direct,
            epsilon = 1e-14
        );
        // Two distinct components: compare against the direct average.
        let la = GaussianLaw::new(-0.5, 0.8).unwrap().log_pdf(0.2);
        let lb = GaussianLaw::new(1.1, 2.0).unwrap().log_pdf(0.2);
        let expected = (0.5 * (la.exp() + lb.exp())).ln();
        assert_abs_diff_eq!(
            log_mixture_gaussian(0.2, &[-0.5, 1.1], &[0.8, 2.0]).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn scenario_runs_deterministically() {
        let sc = tiny_scenario();
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a.replicates.len(), 3);
        for (ra, rb) in a.replicates.iter().zip(&b.replicates) {
            assert_eq!(ra.mlpd, rb.mlpd);
            assert_eq!(ra.a_star, rb.a_star);
            assert_eq!(ra.map_pred, rb.map_pred);
            assert_eq!(ra.diagnostics, rb.diagnostics);
        }
        assert!(a.mean_mlpd.is_finite());
        assert!(a.se_mlpd >= 0.0);
        assert!(a.ci_lower <= a.mean_mlpd && a.mean_mlpd <= a.ci_upper);
        assert!((0.0..=1.0).contains(&a.frac_positive));
    }

    #[test]
    fn corruption_sweep_keeps_the_robust_search_anchored_while_the_plug_in_drifts() {
        let mut sc = tiny_scenario();
        sc.n = 24;
        let g = generate_data(&sc, 3).unwrap();
        let prior = PriorSpec::diffuse(2).with_sigma2(1.0);
        // Query along the corrupted row's direction to maximize plug-in drift.
        let x_new = g.data.row(5);
        let original = g.data.y()[5];
        let magnitudes = [original, 1e3];
        let config = CppConfig::default();
        let sweep = influence_sweep(
            &g.data,
            &prior,
            &x_new,
            5,
            &magnitudes,
            DivergenceKind::Hellinger,
            &config,
        )
        .unwrap();
        // Replacing the response by its original value reproduces the baseline.
        assert_abs_diff_eq!(sweep.robust[0], sweep.baseline_robust, epsilon = 1e-9);
        assert_abs_diff_eq!(sweep.plug_in[0], sweep.baseline_plug_in, epsilon = 1e-12);
        assert!(!sweep.robust_boundary[0]);
        // A gross corruption drags the plug-in far off while the anchored
        // robust search can move at most to the doubled window edge; with a
        // query aligned to the corrupted row, the pull is strong enough to
        // reach that edge and the stop is flagged.
        let robust_shift = (sweep.robust[1] - sweep.baseline_plug_in).abs();
        let plug_shift = (sweep.plug_in[1] - sweep.baseline_plug_in).abs();
        let window_edge = 2.0 * config.window_sd * 1.0;
        assert!(
            robust_shift <= window_edge + 1e-9,
            "robust prediction moved by {robust_shift}"
        );
        assert!(sweep.robust_boundary[1]);
        assert!(plug_shift > 10.0, "plug-in prediction moved by {plug_shift}");
    }

    #[test]
    fn probe_couples_runs_across_perturbation_scales() {
        let mut sc = tiny_scenario();
        sc.n_replicates = 2;
        sc.n_test = 4;
        sc.n_draws = 15;
        let out = elpd_probe(&sc, &[1.0, 10.0]).unwrap();
        assert_eq!(out.len(), 2);
        for summary in &out {
            assert!(summary.mean_mlpd.is_finite());
            assert_eq!(summary.replicates.len(), 2);
        }
    }
}
