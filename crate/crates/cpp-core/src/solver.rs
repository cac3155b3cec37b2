//! Objective assembly and one-dimensional minimization for the
//! divergence-matching prediction criterion.
//!
//! For each observation `i` the objective adds one divergence between the
//! leave-one-out predictive `N(m2_i, s2_i^2)` and the swapped predictive
//! `N(c_i + d_i a, s1_i^2)`, so the total `J(a)` depends on the candidate
//! response only through the per-term gaps
//! `Delta_i(a) = m2_i - (c_i + d_i a)`. Under the log-Bhattacharyya
//! divergence `J` is an exact quadratic and the minimizer has a closed
//! form; under the Hellinger and power divergences `J` is smooth with
//! redescending per-term derivatives, and the minimizer is located by an
//! odd, centered grid scan followed by golden-section refinement inside
//! the bracketing cells.
//!
//! When the noise variance is unknown, it carries an inverse-gamma prior
//! whose conjugate posterior is sampled; two strategies turn the draws into
//! a single prediction. The first solves the criterion once per draw and
//! summarizes the per-draw minimizers (draws whose search hit the window
//! boundary are excluded and counted). The second minimizes the
//! draw-averaged objective directly.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::conjugate::{
    swap_structure, Dataset, LooPredictive, PosteriorState, PriorSpec, SwapCoefficients,
};
use crate::divergence::{
    dpd_gap_coefficients, gaussian_power_integral, ln_var_factor, DivergenceKind, GaussianLaw,
};
use crate::error::{CppError, Result};
use crate::gp::{gp_loo_predictive, gp_predictive, gp_swap_coefficients, GpModel};

/// Slopes with absolute value at or below this are treated as exactly zero
/// when deciding whether the objective depends on the candidate at all.
pub const SLOPE_GUARD: f64 = 1e-14;

/// One observation's contribution to the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CppTerm {
    /// Leave-one-out predictive mean of `y_i`.
    pub m2: f64,
    /// Leave-one-out predictive variance.
    pub s2_sq: f64,
    /// Swapped-mean intercept.
    pub c: f64,
    /// Swapped-mean slope.
    pub d: f64,
    /// Swapped predictive variance.
    pub s1_sq: f64,
}

impl CppTerm {
    /// Mean gap `m2 - (c + d a)` at candidate `a`.
    pub fn gap_at(&self, a: f64) -> f64 {
        self.m2 - (self.c + self.d * a)
    }

    fn validate(&self, i: usize) -> Result<()> {
        let finite = self.m2.is_finite()
            && self.s2_sq.is_finite()
            && self.c.is_finite()
            && self.d.is_finite()
            && self.s1_sq.is_finite();
        if !finite {
            return Err(CppError::InvalidArgument(format!(
                "objective term {i} has non-finite entries"
            )));
        }
        if self.s1_sq <= 0.0 || self.s2_sq <= 0.0 {
            return Err(CppError::InvalidArgument(format!(
                "objective term {i} has non-positive variances (s1_sq {}, s2_sq {})",
                self.s1_sq, self.s2_sq
            )));
        }
        Ok(())
    }
}

/// A fully assembled one-dimensional minimization problem.
#[derive(Debug, Clone)]
pub struct CppProblem {
    /// Per-observation terms.
    pub terms: Vec<CppTerm>,
    /// Divergence applied to every term.
    pub divergence: DivergenceKind,
    /// Plug-in prediction at the candidate covariates; centers the search.
    pub map_prediction: f64,
    /// Noise scale used to size the search window.
    pub sigma_hat: f64,
}

impl CppProblem {
    /// Validates and wraps the parts of a problem.
    pub fn new(
        terms: Vec<CppTerm>,
        divergence: DivergenceKind,
        map_prediction: f64,
        sigma_hat: f64,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(CppError::InvalidArgument(
                "objective needs at least one term".into(),
            ));
        }
        divergence.validate()?;
        for (i, t) in terms.iter().enumerate() {
            t.validate(i)?;
        }
        if !map_prediction.is_finite() {
            return Err(CppError::InvalidArgument(
                "search center must be finite".into(),
            ));
        }
        if !(sigma_hat.is_finite() && sigma_hat > 0.0) {
            return Err(CppError::InvalidArgument(format!(
                "search scale must be positive (got {sigma_hat})"
            )));
        }
        Ok(Self {
            terms,
            divergence,
            map_prediction,
            sigma_hat,
        })
    }

    /// True when every slope is negligible, making the objective constant.
    pub fn all_slopes_zero(&self) -> bool {
        self.terms.iter().all(|t| t.d.abs() <= SLOPE_GUARD)
    }
}

/// Zips leave-one-out predictives and swapped coefficients into a problem.
pub fn assemble_problem(
    loos: &[LooPredictive],
    swaps: &[SwapCoefficients],
    divergence: DivergenceKind,
    map_prediction: f64,
    sigma_hat: f64,
) -> Result<CppProblem> {
    if loos.len() != swaps.len() {
        return Err(CppError::DimensionMismatch(format!(
            "{} leave-one-out terms but {} swapped terms",
            loos.len(),
            swaps.len()
        )));
    }
    let terms = loos
        .iter()
        .zip(swaps)
        .map(|(l, s)| CppTerm {
            m2: l.m2,
            s2_sq: l.s2_sq,
            c: s.c,
            d: s.d,
            s1_sq: s.s1_sq,
        })
        .collect();
    CppProblem::new(terms, divergence, map_prediction, sigma_hat)
}

/// Builds the problem for a fitted conjugate linear model at one candidate
/// covariate vector, using the batched fast swap path.
pub fn conjugate_problem(
    state: &PosteriorState,
    data: &Dataset,
    x_new: &DVector<f64>,
    sigma2: f64,
    divergence: DivergenceKind,
) -> Result<CppProblem> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(CppError::InvalidArgument(format!(
            "noise variance must be positive (got {sigma2})"
        )));
    }
    let structure = swap_structure(state, data, x_new)?;
    let terms = structure
        .terms
        .iter()
        .map(|t| {
            let loo = t.loo_at(sigma2);
            let swap = t.swap_at(sigma2);
            CppTerm {
                m2: loo.m2,
                s2_sq: loo.s2_sq,
                c: swap.c,
                d: swap.d,
                s1_sq: swap.s1_sq,
            }
        })
        .collect();
    CppProblem::new(terms, divergence, structure.map_prediction, sigma2.sqrt())
}

/// Builds the problem for a fitted Gaussian-process model at one candidate
/// covariate vector.
pub fn gp_problem(
    model: &GpModel,
    x_new: &DVector<f64>,
    divergence: DivergenceKind,
) -> Result<CppProblem> {
    let n = model.data().n();
    let mut loos = Vec::with_capacity(n);
    let mut swaps = Vec::with_capacity(n);
    for i in 0..n {
        loos.push(gp_loo_predictive(model, i)?);
        swaps.push(gp_swap_coefficients(model, i, x_new)?);
    }
    let (map_prediction, _) = gp_predictive(model, x_new)?;
    assemble_problem(
        &loos,
        &swaps,
        divergence,
        map_prediction,
        model.sigma2().sqrt(),
    )
}

/// Full objective value `J(a)`, constants included.
pub fn objective_eval(problem: &CppProblem, a: f64) -> f64 {
    problem
        .terms
        .iter()
        .map(|t| {
            let swapped = GaussianLaw {
                mean: t.c + t.d * a,
                var: t.s1_sq,
            };
            let loo = GaussianLaw {
                mean: t.m2,
                var: t.s2_sq,
            };
            problem.divergence.evaluate(&swapped, &loo)
        })
        .sum()
}

/// Exact derivative `J'(a)`; each term contributes `-d_i` times the
/// divergence's gap derivative at `Delta_i(a)`.
pub fn objective_gradient(problem: &CppProblem, a: f64) -> f64 {
    problem
        .terms
        .iter()
        .map(|t| -t.d * problem.divergence.score(t.gap_at(a), t.s1_sq, t.s2_sq))
        .sum()
}

/// Search configuration for the one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CppConfig {
    /// Number of grid points; odd so the center sits on the grid.
    pub grid_len: usize,
    /// Half-width of the search window in units of the noise scale.
    pub window_sd: f64,
    /// Absolute tolerance of the golden-section refinement.
    pub refine_tol: f64,
    /// How per-draw minimizers are combined under an unknown noise variance.
    pub summary: DrawSummary,
}

impl Default for CppConfig {
    fn default() -> Self {
        Self {
            grid_len: 61,
            window_sd: 4.0,
            refine_tol: 1e-8,
            summary: DrawSummary::Mean,
        }
    }
}

impl CppConfig {
    fn validate(&self) -> Result<()> {
        if self.grid_len < 5 || self.grid_len % 2 == 0 {
            return Err(CppError::InvalidArgument(format!(
                "grid length must be odd and at least 5 (got {})",
                self.grid_len
            )));
        }
        if !(self.window_sd.is_finite() && self.window_sd > 0.0) {
            return Err(CppError::InvalidArgument(format!(
                "window width must be positive (got {})",
                self.window_sd
            )));
        }
        if !(self.refine_tol.is_finite() && self.refine_tol > 0.0) {
            return Err(CppError::InvalidArgument(format!(
                "refinement tolerance must be positive (got {})",
                self.refine_tol
            )));
        }
        Ok(())
    }
}

/// Summary applied to the per-draw minimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawSummary {
    /// Arithmetic mean of the included draws.
    Mean,
    /// Median of the included draws.
    Median,
}

/// Outcome of one minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CppSolution {
    /// Minimizing candidate response.
    pub a_star: f64,
    /// Objective value at the minimizer, constants included.
    pub objective_at_star: f64,
    /// True when the gradient at the solution is negligible relative to the
    /// curvature scale, or the solution sits on the search boundary.
    pub converged: bool,
    /// True when every term's gap at the solution lies strictly inside that
    /// term's convexity interval.
    pub convexity_ok: bool,
    /// Second derivative of the objective at the solution.
    pub curvature: f64,
    /// True when the minimizer sits on the (once-doubled) window edge.
    pub boundary: bool,
}

/// Per-term constants cached for the hot evaluation loop; agreement with the
/// public [`objective_eval`]/[`objective_gradient`] pair is unit-tested.
#[derive(Debug, Clone, Copy)]
struct PreparedTerm {
    gap0: f64,
    d: f64,
    radius: f64,
    kind: PreparedKind,
}

#[derive(Debug, Clone, Copy)]
enum PreparedKind {
    /// value = const0 + gap^2 * inv4s; d(value)/d(gap) = 2 * inv4s * gap.
    LogBc { inv4s: f64, const0: f64 },
    /// value = 1 - coef * exp(-gap^2 * inv4s).
    Hellinger { coef: f64, inv4s: f64 },
    /// value = const0 - amp * exp(-kappa * gap^2).
    Dpd { kappa: f64, amp: f64, const0: f64 },
}

impl PreparedTerm {
    fn from(term: &CppTerm, divergence: DivergenceKind) -> Self {
        let s = term.s1_sq + term.s2_sq;
        let kind = match divergence {
            DivergenceKind::LogBc => PreparedKind::LogBc {
                inv4s: 1.0 / (4.0 * s),
                const0: -0.5 * ln_var_factor(term.s1_sq, term.s2_sq),
            },
            DivergenceKind::Hellinger => PreparedKind::Hellinger {
                coef: (0.5 * ln_var_factor(term.s1_sq, term.s2_sq)).exp(),
                inv4s: 1.0 / (4.0 * s),
            },
            DivergenceKind::Dpd { alpha } => {
                let (kappa, w) = dpd_gap_coefficients(term.s1_sq, term.s2_sq, alpha);
                PreparedKind::Dpd {
                    kappa,
                    amp: (1.0 + alpha) * w,
                    const0: alpha * gaussian_power_integral(term.s2_sq, alpha)
                        + gaussian_power_integral(term.s1_sq, alpha),
                }
            }
        };
        PreparedTerm {
            gap0: term.m2 - term.c,
            d: term.d,
            radius: divergence.convexity_radius(term.s1_sq, term.s2_sq),
            kind,
        }
    }

    fn gap(&self, a: f64) -> f64 {
        self.gap0 - self.d * a
    }

    fn value(&self, a: f64) -> f64 {
        let gap = self.gap(a);
        match self.kind {
            PreparedKind::LogBc { inv4s, const0 } => const0 + gap * gap * inv4s,
            PreparedKind::Hellinger { coef, inv4s } => 1.0 - coef * (-gap * gap * inv4s).exp(),
            PreparedKind::Dpd { kappa, amp, const0 } => {
                const0 - amp * (-kappa * gap * gap).exp()
            }
        }
    }

    fn gradient(&self, a: f64) -> f64 {
        let gap = self.gap(a);
        let dgap = match self.kind {
            PreparedKind::LogBc { inv4s, .. } => 2.0 * inv4s * gap,
            PreparedKind::Hellinger { coef, inv4s } => {
                2.0 * coef * inv4s * gap * (-gap * gap * inv4s).exp()
            }
            PreparedKind::Dpd { kappa, amp, .. } => {
                2.0 * kappa * amp * gap * (-kappa * gap * gap).exp()
            }
        };
        -self.d * dgap
    }

    fn within_radius(&self, a: f64) -> bool {
        self.gap(a).abs() < self.radius
    }
}

/// A stack of prepared terms; `scale` turns sums into draw averages.
struct PreparedObjective {
    terms: Vec<PreparedTerm>,
    scale: f64,
}

impl PreparedObjective {
    fn single(problem: &CppProblem) -> Self {
        Self {
            terms: problem
                .terms
                .iter()
                .map(|t| PreparedTerm::from(t, problem.divergence))
                .collect(),
            scale: 1.0,
        }
    }

    fn averaged(problems: &[CppProblem]) -> Self {
        let terms = problems
            .iter()
            .flat_map(|p| p.terms.iter().map(|t| PreparedTerm::from(t, p.divergence)))
            .collect();
        Self {
            terms,
            scale: 1.0 / problems.len() as f64,
        }
    }

    fn value(&self, a: f64) -> f64 {
        self.scale * self.terms.iter().map(|t| t.value(a)).sum::<f64>()
    }

    fn gradient(&self, a: f64) -> f64 {
        self.scale * self.terms.iter().map(|t| t.gradient(a)).sum::<f64>()
    }

    fn convexity_ok(&self, a: f64) -> bool {
        self.terms.iter().all(|t| t.within_radius(a))
    }
}

/// Grid scan plus golden-section refinement on a prepared objective.
///
/// The grid is centered on `center` with half-width `window_sd * sigma_hat`;
/// if the best grid point lands on the window edge, the window is doubled
/// once and the scan repeated. A persistent edge minimum is refined within
/// the edge cell and flagged via `boundary`.
fn minimize_prepared(
    prepared: &PreparedObjective,
    center: f64,
    sigma_hat: f64,
    config: &CppConfig,
) -> Result<CppSolution> {
    config.validate()?;
    let len = config.grid_len;
    let mut half = config.window_sd * sigma_hat;
    let mut boundary = false;
    let mut grid: Vec<f64>;
    let mut values: Vec<f64>;
    let mut best: usize;
    loop {
        let step = 2.0 * half / (len - 1) as f64;
        grid = (0..len).map(|k| center - half + step * k as f64).collect();
        values = grid.iter().map(|&a| prepared.value(a)).collect();
        best = 0;
        for k in 1..len {
            // Strictly better value wins; exact ties go to the point nearest
            // the center, then to the smaller candidate.
            let better = values[k] < values[best]
                || (values[k] == values[best]
                    && (grid[k] - center).abs() < (grid[best] - center).abs());
            if better {
                best = k;
            }
        }
        if best == 0 || best == len - 1 {
            if boundary {
                break;
            }
            boundary = true;
            half *= 2.0;
            continue;
        }
        boundary = false;
        break;
    }
    let (lo, hi) = if best == 0 {
        (grid[0], grid[1])
    } else if best == len - 1 {
        (grid[len - 2], grid[len - 1])
    } else {
        (grid[best - 1], grid[best + 1])
    };
    let (mut a_star, mut value_star) = golden_section(|a| prepared.value(a), lo, hi, config.refine_tol);
    if values[best] < value_star {
        a_star = grid[best];
        value_star = values[best];
    }
    let gradient = prepared.gradient(a_star);
    let h = 1e-3 * sigma_hat.max(1e-6);
    let curvature =
        (prepared.value(a_star + h) - 2.0 * value_star + prepared.value(a_star - h)) / (h * h);
    let converged = boundary || gradient.abs() <= 1e-5 * curvature.abs().max(1.0);
    Ok(CppSolution {
        a_star,
        objective_at_star: value_star,
        converged,
        convexity_ok: prepared.convexity_ok(a_star),
        curvature,
        boundary,
    })
}

/// Golden-section minimization on `[lo, hi]`, returning the best point seen.
fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let mut best = (mid, fm);
    if f1 < best.1 {
        best = (x1, f1);
    }
    if f2 < best.1 {
        best = (x2, f2);
    }
    best
}

/// Exact minimizer under the log-Bhattacharyya divergence, where the
/// objective is quadratic: `a* = sum(d_i (m2_i - c_i)/S_i) / sum(d_i^2/S_i)`
/// with `S_i = s1_i^2 + s2_i^2`.
pub fn solve_logbc_closed_form(problem: &CppProblem) -> Result<CppSolution> {
    if problem.divergence != DivergenceKind::LogBc {
        return Err(CppError::InvalidArgument(
            "closed form applies only to the log-Bhattacharyya divergence".into(),
        ));
    }
    if problem.all_slopes_zero() {
        return Err(CppError::AllDZero);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for t in &problem.terms {
        let s = t.s1_sq + t.s2_sq;
        num += t.d * (t.m2 - t.c) / s;
        den += t.d * t.d / s;
    }
    let a_star = num / den;
    Ok(CppSolution {
        a_star,
        objective_at_star: objective_eval(problem, a_star),
        converged: true,
        convexity_ok: true,
        // J''(a) = sum d_i^2 / (2 S_i), constant in a.
        curvature: 0.5 * den,
        boundary: false,
    })
}

/// Grid-plus-refinement minimization of a single problem.
pub fn solve_1d(problem: &CppProblem, config: &CppConfig) -> Result<CppSolution> {
    if problem.all_slopes_zero() {
        return Err(CppError::AllDZero);
    }
    let prepared = PreparedObjective::single(problem);
    minimize_prepared(&prepared, problem.map_prediction, problem.sigma_hat, config)
}

/// Dispatches to the closed form for the log-Bhattacharyya divergence and to
/// the numerical search otherwise.
pub fn solve(problem: &CppProblem, config: &CppConfig) -> Result<CppSolution> {
    match problem.divergence {
        DivergenceKind::LogBc => solve_logbc_closed_form(problem),
        _ => solve_1d(problem, config),
    }
}

/// Inverse-gamma parameters (shape, scale) for the noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgParams {
    /// Shape parameter; must be positive.
    pub shape: f64,
    /// Scale parameter; must be positive.
    pub scale: f64,
}

impl Default for IgParams {
    /// Weakly informative default used throughout the evaluation harness.
    fn default() -> Self {
        Self {
            shape: 0.1,
            scale: 0.1,
        }
    }
}

impl IgParams {
    fn validate(&self) -> Result<()> {
        if !(self.shape.is_finite() && self.shape > 0.0)
            || !(self.scale.is_finite() && self.scale > 0.0)
        {
            return Err(CppError::NonPositiveIgParams {
                shape: self.shape,
                scale: self.scale,
            });
        }
        Ok(())
    }
}

/// Conjugate update of the inverse-gamma noise prior given the fitted state:
/// shape gains `n/2`, scale gains half the regularized residual quadratic
/// `y'y + beta0' V^{-1} beta0 - b' beta_hat`.
pub fn sigma2_posterior_params(
    state: &PosteriorState,
    data: &Dataset,
    prior: &PriorSpec,
    ig: &IgParams,
) -> Result<IgParams> {
    ig.validate()?;
    let v_chol =
        nalgebra::Cholesky::new(prior.v.clone()).ok_or(CppError::NonSpdPrior)?;
    let prior_quad = prior.beta0.dot(&v_chol.solve(&prior.beta0));
    let quad = data.y().dot(data.y()) + prior_quad - state.b().dot(state.beta_hat());
    let scale = ig.scale + 0.5 * quad;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(CppError::Solver(format!(
            "noise-variance posterior scale is not positive (got {scale})"
        )));
    }
    Ok(IgParams {
        shape: ig.shape + 0.5 * data.n() as f64,
        scale,
    })
}

/// Samples noise variances from the inverse-gamma posterior by inverting
/// gamma draws.
pub fn draw_sigma2_posterior<R: Rng + ?Sized>(
    params: &IgParams,
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    if n_draws == 0 {
        return Err(CppError::InvalidArgument(
            "at least one posterior draw is required".into(),
        ));
    }
    let gamma = Gamma::new(params.shape, 1.0 / params.scale)
        .map_err(|e| CppError::InvalidArgument(format!("gamma sampler rejected parameters: {e}")))?;
    Ok((0..n_draws).map(|_| 1.0 / gamma.sample(rng)).collect())
}

/// Combines per-draw minimizers into a single prediction.
pub fn summarize_draws(values: &[f64], summary: DrawSummary) -> f64 {
    match summary {
        DrawSummary::Mean => values.iter().sum::<f64>() / values.len() as f64,
        DrawSummary::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                0.5 * (sorted[mid - 1] + sorted[mid])
            }
        }
    }
}

/// Result of the solve-per-draw strategy.
#[derive(Debug, Clone)]
pub struct ApproachOneResult {
    /// Summary of the included per-draw minimizers.
    pub a_hat: f64,
    /// Every per-draw solution, boundary ones included, in draw order.
    pub draw_solutions: Vec<CppSolution>,
    /// Number of draws excluded because their search hit the window edge.
    pub n_boundary: usize,
    /// Number of draws entering the summary.
    pub n_used: usize,
}

/// Solves the criterion once per posterior noise draw and summarizes the
/// minimizers, excluding boundary draws.
///
/// Every per-draw problem is searched over a common window scaled by the
/// root of the mean drawn variance, so that small-variance draws cannot
/// truncate the search prematurely.
pub fn solve_approach_i<F>(
    build_problem: &F,
    draws: &[f64],
    config: &CppConfig,
) -> Result<ApproachOneResult>
where
    F: Fn(f64) -> Result<CppProblem>,
{
    let shared_sd = shared_window_scale(draws)?;
    let mut draw_solutions = Vec::with_capacity(draws.len());
    for (t, &sigma2) in draws.iter().enumerate() {
        let run = || -> Result<CppSolution> {
            let mut problem = build_problem(sigma2)?;
            problem.sigma_hat = shared_sd;
            solve(&problem, config)
        };
        let solution = run().map_err(|e| CppError::DrawFailed {
            draw: t,
            source: Box::new(e),
        })?;
        draw_solutions.push(solution);
    }
    let included: Vec<f64> = draw_solutions
        .iter()
        .filter(|s| !s.boundary)
        .map(|s| s.a_star)
        .collect();
    if included.is_empty() {
        return Err(CppError::AllDrawsAtBoundary);
    }
    let n_boundary = draw_solutions.len() - included.len();
    Ok(ApproachOneResult {
        a_hat: summarize_draws(&included, config.summary),
        n_used: included.len(),
        n_boundary,
        draw_solutions,
    })
}

/// Minimizes the draw-averaged objective directly.
///
/// Under the log-Bhattacharyya divergence the average of per-draw quadratics
/// is again quadratic, so the pooled closed form applies; otherwise the
/// averaged objective is searched with the same grid-plus-refinement scheme,
/// centered on the (draw-independent) plug-in prediction and windowed by the
/// root mean drawn variance.
pub fn solve_approach_ii<F>(
    build_problem: &F,
    draws: &[f64],
    config: &CppConfig,
) -> Result<CppSolution>
where
    F: Fn(f64) -> Result<CppProblem>,
{
    let shared_sd = shared_window_scale(draws)?;
    let mut problems = Vec::with_capacity(draws.len());
    for (t, &sigma2) in draws.iter().enumerate() {
        let problem = build_problem(sigma2).map_err(|e| CppError::DrawFailed {
            draw: t,
            source: Box::new(e),
        })?;
        problems.push(problem);
    }
    let divergence = problems[0].divergence;
    let all_zero = problems.iter().all(CppProblem::all_slopes_zero);
    if all_zero {
        return Err(CppError::AllDZero);
    }
    if divergence == DivergenceKind::LogBc {
        // Pool every draw's terms: the averaged quadratic's minimizer equals
        // the pooled closed form, with curvature scaled back to a mean.
        let pooled_terms: Vec<CppTerm> = problems.iter().flat_map(|p| p.terms.clone()).collect();
        let pooled = CppProblem::new(
            pooled_terms,
            DivergenceKind::LogBc,
            problems[0].map_prediction,
            shared_sd,
        )?;
        let mut solution = solve_logbc_closed_form(&pooled)?;
        let scale = 1.0 / problems.len() as f64;
        solution.objective_at_star *= scale;
        solution.curvature *= scale;
        return Ok(solution);
    }
    let prepared = PreparedObjective::averaged(&problems);
    minimize_prepared(&prepared, problems[0].map_prediction, shared_sd, config)
}

fn shared_window_scale(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(CppError::InvalidArgument(
            "at least one posterior draw is required".into(),
        ));
    }
    if !draws.iter().all(|&d| d.is_finite() && d > 0.0) {
        return Err(CppError::InvalidArgument(
            "posterior draws must be positive and finite".into(),
        ));
    }
    Ok((draws.iter().sum::<f64>() / draws.len() as f64).sqrt())
}
