//! Conjugate Gaussian linear-model algebra.
//!
//! Model: `y | beta ~ N(X beta, sigma2 I)`, `beta ~ N(beta0, sigma2 V)`.
//! The posterior mean solves the regularized normal equations
//! `A beta_hat = b` with `A = X'X + V^{-1}` and `b = X'y + V^{-1} beta0`;
//! both are free of `sigma2`, which only scales predictive variances.
//!
//! Two per-observation predictive constructions are provided:
//!
//! * the leave-one-out predictive of `y_i`, via the Sherman–Morrison
//!   identity: `m2_i = (x_i' beta_hat - l_i y_i) / (1 - l_i)`,
//!   `s2_i^2 = sigma2 / (1 - l_i)` with leverage `l_i = x_i' A^{-1} x_i`;
//! * the swapped predictive of `y_i` after replacing `(x_i, y_i)` by a
//!   candidate pair `(x_new, a)`: its mean is affine in the candidate,
//!   `m1_i(a) = c_i + d_i a`, and its variance is
//!   `s1_i^2 = sigma2 (1 + delta_i)` with
//!   `delta_i = x_i' (A - x_i x_i' + x_new x_new')^{-1} x_i`.
//!
//! `swap_coefficients_naive` factorizes the swapped system from scratch for
//! every `i` (the testing oracle); `swap_coefficients_fast` reaches the same
//! coefficients through two sequential rank-one corrections of the stored
//! `A^{-1}`, and `swap_structure` batches the fast path across all `i` in
//! `O(n p)` after two matrix–vector products.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{CppError, Result};

/// Leverages at or above `1 - LEVERAGE_GUARD` are treated as degenerate.
pub const LEVERAGE_GUARD: f64 = 1e-12;

/// Augmentation denominators at or below this are treated as degenerate.
pub const AUGMENTATION_GUARD: f64 = 1e-12;

/// A fixed design/response pair.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// Builds a dataset, requiring `n >= 2`, `p >= 1`, matching lengths, and
    /// finite entries.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() < 2 || x.ncols() < 1 {
            return Err(CppError::InvalidArgument(format!(
                "design must have at least 2 rows and 1 column (got {}x{})",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.nrows() != y.len() {
            return Err(CppError::DimensionMismatch(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(CppError::InvalidArgument(
                "design and response entries must be finite".into(),
            ));
        }
        Ok(Self { x, y })
    }

    /// Covariate matrix, one row per observation.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Response vector.
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Covariate row `i` as a column vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Copy of the dataset with response `j` replaced by `value`.
    pub fn with_response(&self, j: usize, value: f64) -> Result<Self> {
        if j >= self.n() {
            return Err(CppError::InvalidArgument(format!(
                "row index {j} out of range for {} observations",
                self.n()
            )));
        }
        if !value.is_finite() {
            return Err(CppError::InvalidArgument(
                "replacement response must be finite".into(),
            ));
        }
        let mut y = self.y.clone();
        y[j] = value;
        Ok(Self {
            x: self.x.clone(),
            y,
        })
    }
}

/// Fixed Gaussian prior on the coefficients, with optional known noise variance.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    /// Prior mean of the coefficients.
    pub beta0: DVector<f64>,
    /// Prior scale matrix; the coefficient prior covariance is `sigma2 * v`.
    pub v: DMatrix<f64>,
    /// Known noise variance, or `None` in unknown-variance mode.
    pub sigma2: Option<f64>,
}

impl PriorSpec {
    /// Diffuse default: zero mean, `v = 100 I`, unknown noise variance.
    pub fn diffuse(p: usize) -> Self {
        Self {
            beta0: DVector::zeros(p),
            v: DMatrix::identity(p, p) * 100.0,
            sigma2: None,
        }
    }

    /// Same prior with a known noise variance attached.
    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = Some(sigma2);
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.beta0.len() != p || self.v.nrows() != p || self.v.ncols() != p {
            return Err(CppError::DimensionMismatch(format!(
                "prior dimensions do not match p = {p}"
            )));
        }
        if !self.beta0.iter().all(|v| v.is_finite()) || !self.v.iter().all(|v| v.is_finite()) {
            return Err(CppError::InvalidArgument(
                "prior entries must be finite".into(),
            ));
        }
        if let Some(s2) = self.sigma2 {
            if !(s2.is_finite() && s2 > 0.0) {
                return Err(CppError::InvalidArgument(format!(
                    "known noise variance must be positive (got {s2})"
                )));
            }
        }
        Ok(())
    }
}

/// Posterior summary for a design/prior pair; immutable after construction.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    a: DMatrix<f64>,
    a_chol: Cholesky<f64, nalgebra::Dyn>,
    a_inv: DMatrix<f64>,
    b: DVector<f64>,
    beta_hat: DVector<f64>,
    leverages: DVector<f64>,
}

impl PosteriorState {
    /// Regularized normal-equations matrix `A = X'X + V^{-1}`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Explicit inverse of `A`.
    pub fn a_inv(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    /// Right-hand side `b = X'y + V^{-1} beta0`.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Posterior mean `beta_hat = A^{-1} b`.
    pub fn beta_hat(&self) -> &DVector<f64> {
        &self.beta_hat
    }

    /// All leverages `l_i = x_i' A^{-1} x_i`.
    pub fn leverages(&self) -> &DVector<f64> {
        &self.leverages
    }

    /// Leverage of observation `i`.
    pub fn leverage(&self, i: usize) -> f64 {
        self.leverages[i]
    }

    /// Solves `A z = rhs` through the stored factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.a_chol.solve(rhs)
    }
}

/// Leave-one-out predictive law parameters for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooPredictive {
    /// Leave-one-out predictive mean of `y_i`.
    pub m2: f64,
    /// Leave-one-out predictive variance `sigma2 / (1 - l_i)`.
    pub s2_sq: f64,
}

/// Swapped-predictive coefficients for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapCoefficients {
    /// Intercept of the affine swapped mean `m1_i(a) = c + d a`.
    pub c: f64,
    /// Slope of the affine swapped mean.
    pub d: f64,
    /// Swapped predictive variance `sigma2 (1 + delta_lev)`.
    pub s1_sq: f64,
    /// Self-sensitivity `x_i' (A - x_i x_i' + x_new x_new')^{-1} x_i`.
    pub delta_lev: f64,
}

fn cholesky_of(m: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m.clone())
}

fn build_system(data: &Dataset, prior: &PriorSpec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    prior.validate(data.p())?;
    let v_chol = cholesky_of(&prior.v).ok_or(CppError::NonSpdPrior)?;
    let v_inv = v_chol.inverse();
    let mut a = data.x.transpose() * &data.x + &v_inv;
    // Symmetrize to wash out accumulation asymmetry before factorizing.
    let at = a.transpose();
    a += at;
    a *= 0.5;
    let b = data.x.transpose() * &data.y + v_inv * &prior.beta0;
    Ok((a, b))
}

/// Fits the conjugate posterior, computing `A`, `A^{-1}`, `b`, `beta_hat`,
/// and every leverage in one pass.
///
/// Fails with [`CppError::DegenerateLeverage`] if any leverage is within
/// [`LEVERAGE_GUARD`] of 1, since the leave-one-out variance diverges there.
pub fn fit_posterior(data: &Dataset, prior: &PriorSpec) -> Result<PosteriorState> {
    let (a, b) = build_system(data, prior)?;
    let a_chol = cholesky_of(&a).ok_or(CppError::SingularSystem)?;
    let a_inv = a_chol.inverse();
    let beta_hat = a_chol.solve(&b);
    // l_i = x_i' A^{-1} x_i, batched as the row-wise quadratic form.
    let u = &data.x * &a_inv;
    let mut leverages = DVector::zeros(data.n());
    for i in 0..data.n() {
        let l = u.row(i).dot(&data.x.row(i));
        if l >= 1.0 - LEVERAGE_GUARD {
            return Err(CppError::DegenerateLeverage(i));
        }
        leverages[i] = l;
    }
    Ok(PosteriorState {
        a,
        a_chol,
        a_inv,
        b,
        beta_hat,
        leverages,
    })
}

/// Leave-one-out predictive of `y_i` via the Sherman–Morrison identity.
pub fn loo_predictive(
    state: &PosteriorState,
    data: &Dataset,
    i: usize,
    sigma2: f64,
) -> Result<LooPredictive> {
    check_index(data, i)?;
    check_sigma2(sigma2)?;
    let l = state.leverage(i);
    if l >= 1.0 - LEVERAGE_GUARD {
        return Err(CppError::DegenerateLeverage(i));
    }
    let fit = data.x.row(i).dot(&state.beta_hat.transpose());
    Ok(LooPredictive {
        m2: (fit - l * data.y[i]) / (1.0 - l),
        s2_sq: sigma2 / (1.0 - l),
    })
}

/// Swapped-predictive coefficients by full refactorization of the swapped
/// system — the `O(p^3)`-per-call reference oracle for the fast path.
pub fn swap_coefficients_naive(
    data: &Dataset,
    prior: &PriorSpec,
    i: usize,
    x_new: &DVector<f64>,
    sigma2: f64,
) -> Result<SwapCoefficients> {
    check_index(data, i)?;
    check_sigma2(sigma2)?;
    check_candidate(data, x_new)?;
    let (a, b) = build_system(data, prior)?;
    let xi = data.row(i);
    let a_aug = a - &xi * xi.transpose() + x_new * x_new.transpose();
    let chol = cholesky_of(&a_aug).ok_or(CppError::SingularAugmentedSystem(i))?;
    let b_minus = b - &xi * data.y[i];
    let c = xi.dot(&chol.solve(&b_minus));
    let d = xi.dot(&chol.solve(x_new));
    let delta_lev = xi.dot(&chol.solve(&xi));
    Ok(SwapCoefficients {
        c,
        d,
        s1_sq: sigma2 * (1.0 + delta_lev),
        delta_lev,
    })
}

/// Swapped-predictive coefficients through two sequential rank-one
/// corrections of `A^{-1}`: remove `x_i`, then add `x_new`.
///
/// With `u = A^{-1} x_i`, `w = A^{-1} x_new`, and `B = (A - x_i x_i')^{-1}`:
/// `B v = A^{-1} v + u (u'v)/(1 - l_i)`, and the downdate by `x_new` divides
/// through `D = 1 + x_new' B x_new`. Cost is `O(p^2)` per call after the
/// single stored inversion.
pub fn swap_coefficients_fast(
    state: &PosteriorState,
    data: &Dataset,
    i: usize,
    x_new: &DVector<f64>,
    sigma2: f64,
) -> Result<SwapCoefficients> {
    check_index(data, i)?;
    check_sigma2(sigma2)?;
    check_candidate(data, x_new)?;
    let l = state.leverage(i);
    if l >= 1.0 - LEVERAGE_GUARD {
        return Err(CppError::DegenerateLeverage(i));
    }
    let one_minus = 1.0 - l;
    let xi = data.row(i);
    let w = state.a_inv() * x_new;
    let xi_w = xi.dot(&w);
    let fit = xi.dot(&state.beta_hat);
    let new_fit = x_new.dot(&state.beta_hat);
    let lev_new = x_new.dot(&w);
    scaled_swap_term(
        i,
        l,
        data.y[i],
        fit,
        new_fit,
        xi_w,
        lev_new,
        one_minus,
        sigma2,
    )
}

/// The `sigma2`-free per-observation quantities behind the fast swap path,
/// batched across all observations for one candidate covariate vector.
#[derive(Debug, Clone, Copy)]
pub struct SwapStructureTerm {
    /// Leave-one-out predictive mean of `y_i` (free of `sigma2`).
    pub m2: f64,
    /// Swapped-mean intercept.
    pub c: f64,
    /// Swapped-mean slope.
    pub d: f64,
    /// Swapped self-sensitivity `delta_i`; `s1_i^2 = sigma2 (1 + delta_i)`.
    pub delta_lev: f64,
    /// Full-data leverage `l_i`; `s2_i^2 = sigma2 / (1 - l_i)`.
    pub leverage: f64,
}

impl SwapStructureTerm {
    /// Leave-one-out predictive at a given noise variance.
    pub fn loo_at(&self, sigma2: f64) -> LooPredictive {
        LooPredictive {
            m2: self.m2,
            s2_sq: sigma2 / (1.0 - self.leverage),
        }
    }

    /// Swapped coefficients at a given noise variance.
    pub fn swap_at(&self, sigma2: f64) -> SwapCoefficients {
        SwapCoefficients {
            c: self.c,
            d: self.d,
            s1_sq: sigma2 * (1.0 + self.delta_lev),
            delta_lev: self.delta_lev,
        }
    }
}

/// Batched fast-path output for one candidate covariate vector.
#[derive(Debug, Clone)]
pub struct SwapStructure {
    /// Per-observation swap terms, in observation order.
    pub terms: Vec<SwapStructureTerm>,
    /// Plug-in prediction `x_new' beta_hat` at the candidate covariates.
    pub map_prediction: f64,
    /// Candidate leverage `x_new' A^{-1} x_new`.
    pub lev_new: f64,
}

/// Computes every observation's swap term for one candidate vector in
/// `O(n p)` after two `O(p^2)`/`O(n p)` products, exploiting that all
/// per-observation corrections reduce to scalars built from `X beta_hat`,
/// `X A^{-1} x_new`, and the stored leverages.
pub fn swap_structure(
    state: &PosteriorState,
    data: &Dataset,
    x_new: &DVector<f64>,
) -> Result<SwapStructure> {
    check_candidate(data, x_new)?;
    let w = state.a_inv() * x_new;
    let fits = &data.x * state.beta_hat();
    let xw = &data.x * &w;
    let lev_new = x_new.dot(&w);
    let map_prediction = x_new.dot(state.beta_hat());
    let mut terms = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let l = state.leverage(i);
        if l >= 1.0 - LEVERAGE_GUARD {
            return Err(CppError::DegenerateLeverage(i));
        }
        let coeff = scaled_swap_term(
            i,
            l,
            data.y[i],
            fits[i],
            map_prediction,
            xw[i],
            lev_new,
            1.0 - l,
            1.0,
        )?;
        terms.push(SwapStructureTerm {
            m2: (fits[i] - l * data.y[i]) / (1.0 - l),
            c: coeff.c,
            d: coeff.d,
            delta_lev: coeff.delta_lev,
            leverage: l,
        });
    }
    Ok(SwapStructure {
        terms,
        map_prediction,
        lev_new,
    })
}

/// Fast swapped coefficients for all observations at a fixed noise variance.
pub fn swap_all_fast(
    state: &PosteriorState,
    data: &Dataset,
    x_new: &DVector<f64>,
    sigma2: f64,
) -> Result<Vec<SwapCoefficients>> {
    check_sigma2(sigma2)?;
    let structure = swap_structure(state, data, x_new)?;
    Ok(structure.terms.iter().map(|t| t.swap_at(sigma2)).collect())
}

/// Scalar core of the fast path, shared by the per-call and batched variants.
#[allow(clippy::too_many_arguments)]
fn scaled_swap_term(
    i: usize,
    leverage: f64,
    y_i: f64,
    fit_i: f64,
    new_fit: f64,
    xi_w: f64,
    lev_new: f64,
    one_minus: f64,
    sigma2: f64,
) -> Result<SwapCoefficients> {
    // x_i' B b_minus equals the leave-one-out mean m2_i.
    let u_b_minus = fit_i - leverage * y_i;
    let m2 = u_b_minus / one_minus;
    // x_new' B b_minus = w' b_minus + (x_i'w)(u' b_minus)/(1 - l).
    let new_b_minus = (new_fit - xi_w * y_i) + xi_w * u_b_minus / one_minus;
    let t = xi_w / one_minus;
    let denom = 1.0 + lev_new + xi_w * xi_w / one_minus;
    if denom <= AUGMENTATION_GUARD {
        return Err(CppError::DegenerateAugmentation(i));
    }
    let c = m2 - t * new_b_minus / denom;
    let d = t / denom;
    let delta_lev = leverage / one_minus - t * t / denom;
    Ok(SwapCoefficients {
        c,
        d,
        s1_sq: sigma2 * (1.0 + delta_lev),
        delta_lev,
    })
}

fn check_index(data: &Dataset, i: usize) -> Result<()> {
    if i >= data.n() {
        return Err(CppError::InvalidArgument(format!(
            "observation index {i} out of range for {} observations",
            data.n()
        )));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(CppError::InvalidArgument(format!(
            "noise variance must be positive and finite (got {sigma2})"
        )));
    }
    Ok(())
}

fn check_candidate(data: &Dataset, x_new: &DVector<f64>) -> Result<()> {
    if x_new.len() != data.p() {
        return Err(CppError::DimensionMismatch(format!(
            "candidate covariates have {} entries but the design has {} columns",
            x_new.len(),
            data.p()
        )));
    }
    if !x_new.iter().all(|v| v.is_finite()) {
        return Err(CppError::InvalidArgument(
            "candidate covariates must be finite".into(),
        ));
    }
    Ok(())
}

/// Covariate transform applied before the conjugate machinery.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    /// Pass covariates through unchanged.
    Identity,
    /// Intercept column plus per-coordinate powers `1..=degree`.
    Polynomial {
        /// Highest power per coordinate; at least 1.
        degree: usize,
    },
    /// Intercept, per-coordinate powers `1..=degree`, and one truncated power
    /// `max(x - knot, 0)^degree` per knot and coordinate.
    TruncatedPowerSpline {
        /// Spline degree; at least 1.
        degree: usize,
        /// Fixed knot locations shared across coordinates.
        knots: Vec<f64>,
    },
}

impl BasisSpec {
    /// Number of expanded columns for `q` raw coordinates.
    pub fn output_dim(&self, q: usize) -> usize {
        match self {
            BasisSpec::Identity => q,
            BasisSpec::Polynomial { degree } => 1 + q * degree,
            BasisSpec::TruncatedPowerSpline { degree, knots } => 1 + q * (degree + knots.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BasisSpec::Identity => Ok(()),
            BasisSpec::Polynomial { degree } | BasisSpec::TruncatedPowerSpline { degree, .. }
                if *degree == 0 =>
            {
                Err(CppError::InvalidArgument(
                    "basis degree must be at least 1".into(),
                ))
            }
            BasisSpec::TruncatedPowerSpline { knots, .. }
                if !knots.iter().all(|k| k.is_finite()) =>
            {
                Err(CppError::InvalidArgument("knots must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Result of a basis expansion.
#[derive(Debug, Clone)]
pub struct BasisExpansion {
    /// Expanded design matrix, ready to feed [`Dataset::new`].
    pub z: DMatrix<f64>,
    /// True when the expansion has more columns than rows; permitted (the
    /// prior regularizes) but worth surfacing to the caller.
    pub ill_posed: bool,
}

/// Expands raw covariates through the chosen basis; downstream operations
/// apply verbatim to the expanded columns.
pub fn basis_expand(x_raw: &DMatrix<f64>, basis: &BasisSpec) -> Result<BasisExpansion> {
    basis.validate()?;
    let n = x_raw.nrows();
    let q = x_raw.ncols();
    let k = basis.output_dim(q);
    let z = match basis {
        BasisSpec::Identity => x_raw.clone(),
        BasisSpec::Polynomial { degree } => {
            let mut z = DMatrix::zeros(n, k);
            for r in 0..n {
                z[(r, 0)] = 1.0;
                let mut col = 1;
                for j in 0..q {
                    let mut pw = 1.0;
                    for _ in 0..*degree {
                        pw *= x_raw[(r, j)];
                        z[(r, col)] = pw;
                        col += 1;
                    }
                }
            }
            z
        }
        BasisSpec::TruncatedPowerSpline { degree, knots } => {
            let mut z = DMatrix::zeros(n, k);
            for r in 0..n {
                z[(r, 0)] = 1.0;
                let mut col = 1;
                for j in 0..q {
                    let xv = x_raw[(r, j)];
                    let mut pw = 1.0;
                    for _ in 0..*degree {
                        pw *= xv;
                        z[(r, col)] = pw;
                        col += 1;
                    }
                    for knot in knots {
                        let excess = (xv - knot).max(0.0);
                        z[(r, col)] = excess.powi(*degree as i32);
                        col += 1;
                    }
                }
            }
            z
        }
    };
    Ok(BasisExpansion { z, ill_posed: k > n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point_dataset() -> (Dataset, PriorSpec) {
        let data = Dataset::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DVector::from_row_slice(&[0.0, 2.0]),
        )
        .unwrap();
        let prior = PriorSpec {
            beta0: DVector::zeros(1),
            v: DMatrix::identity(1, 1),
            sigma2: Some(1.0),
        };
        (data, prior)
    }

    #[test]
    fn two_point_posterior_hand_values() {
        // A = 2 + 1 = 3, b = 2, beta_hat = 2/3, leverages 1/3.
        let (data, prior) = two_point_dataset();
        let state = fit_posterior(&data, &prior).unwrap();
        assert_abs_diff_eq!(state.a()[(0, 0)], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(state.b()[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(state.beta_hat()[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(state.leverage(0), 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(state.leverage(1), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn two_point_loo_hand_values() {
        let (data, prior) = two_point_dataset();
        let state = fit_posterior(&data, &prior).unwrap();
        let loo = loo_predictive(&state, &data, 0, 1.0).unwrap();
        assert_abs_diff_eq!(loo.m2, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(loo.s2_sq, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn two_point_swap_hand_values() {
        // Swapping observation 0 for (x_new = 1, a): A_aug = 3,
        // beta_hat_aug = (2 + a)/3, so c = 2/3, d = 1/3, delta = 1/3.
        let (data, prior) = two_point_dataset();
        let x_new = DVector::from_row_slice(&[1.0]);
        let naive = swap_coefficients_naive(&data, &prior, 0, &x_new, 1.0).unwrap();
        assert_abs_diff_eq!(naive.c, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(naive.d, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(naive.delta_lev, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(naive.s1_sq, 4.0 / 3.0, epsilon = 1e-14);

        let state = fit_posterior(&data, &prior).unwrap();
        let fast = swap_coefficients_fast(&state, &data, 0, &x_new, 1.0).unwrap();
        assert_abs_diff_eq!(fast.c, naive.c, epsilon = 1e-12);
        assert_abs_diff_eq!(fast.d, naive.d, epsilon = 1e-12);
        assert_abs_diff_eq!(fast.delta_lev, naive.delta_lev, epsilon = 1e-12);
        assert_abs_diff_eq!(fast.s1_sq, naive.s1_sq, epsilon = 1e-12);
    }

    #[test]
    fn diffuse_prior_approaches_least_squares() {
        // With v = 1e6 I the posterior mean matches the normal-equations
        // least-squares solution to 1e-4 relative.
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[1.0, 0.3, 1.0, -1.2, 1.0, 2.1, 1.0, 0.4, 1.0, -0.5, 1.0, 1.7],
        );
        let y = DVector::from_row_slice(&[0.2, -2.0, 4.5, 0.9, -0.8, 3.1]);
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let prior = PriorSpec {
            beta0: DVector::zeros(2),
            v: DMatrix::identity(2, 2) * 1e6,
            sigma2: Some(1.0),
        };
        let state = fit_posterior(&data, &prior).unwrap();
        let ols = Cholesky::new(x.transpose() * &x)
            .unwrap()
            .solve(&(x.transpose() * &y));
        for j in 0..2 {
            assert!((state.beta_hat()[j] - ols[j]).abs() <= 1e-4 * ols[j].abs().max(1.0));
        }
    }

    #[test]
    fn posterior_mean_flips_sign_with_the_response() {
        // x = (1, -1), y = (c, -c): beta_hat = 2c/(2 + 1/v), odd in y.
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let c = 1.7;
        let v = 0.5;
        let prior = PriorSpec {
            beta0: DVector::zeros(1),
            v: DMatrix::identity(1, 1) * v,
            sigma2: Some(1.0),
        };
        let plus = fit_posterior(
            &Dataset::new(x.clone(), DVector::from_row_slice(&[c, -c])).unwrap(),
            &prior,
        )
        .unwrap();
        let minus = fit_posterior(
            &Dataset::new(x, DVector::from_row_slice(&[-c, c])).unwrap(),
            &prior,
        )
        .unwrap();
        assert_abs_diff_eq!(plus.beta_hat()[0], 2.0 * c / (2.0 + 1.0 / v), epsilon = 1e-12);
        assert_abs_diff_eq!(plus.beta_hat()[0], -minus.beta_hat()[0], epsilon = 1e-14);
    }

    #[test]
    fn zero_covariate_row_has_zero_leverage_and_prior_scale_variance() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.5, -0.5, 1.0]);
        let y = DVector::from_row_slice(&[0.7, 1.0, -0.2]);
        let data = Dataset::new(x, y).unwrap();
        let prior = PriorSpec {
            beta0: DVector::zeros(2),
            v: DMatrix::identity(2, 2),
            sigma2: Some(2.0),
        };
        let state = fit_posterior(&data, &prior).unwrap();
        assert_abs_diff_eq!(state.leverage(0), 0.0, epsilon = 1e-15);
        let loo = loo_predictive(&state, &data, 0, 2.0).unwrap();
        assert_abs_diff_eq!(loo.m2, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(loo.s2_sq, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn swapping_back_the_same_observation_recovers_the_full_data_predictive() {
        // x_new = x_i and a = y_i reconstitute the original dataset, so the
        // swapped mean at a = y_i must equal the full-data fit x_i' beta_hat.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.2, 1.0, -0.7, 1.0, 1.4, 1.0, 0.1]);
        let y = DVector::from_row_slice(&[0.5, -0.3, 2.2, 0.8]);
        let data = Dataset::new(x, y).unwrap();
        let prior = PriorSpec {
            beta0: DVector::zeros(2),
            v: DMatrix::identity(2, 2) * 3.0,
            sigma2: Some(1.0),
        };
        let state = fit_posterior(&data, &prior).unwrap();
        for i in 0..data.n() {
            let xi = data.row(i);
            let fast = swap_coefficients_fast(&state, &data, i, &xi, 1.0).unwrap();
            let full_fit = xi.dot(state.beta_hat());
            assert_abs_diff_eq!(fast.c + fast.d * data.y()[i], full_fit, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthogonal_candidate_has_zero_slope() {
        // d_i = x_i' G x_new vanishes when x_new is orthogonal to x_i in the
        // deleted-system metric B = (A - x_i x_i')^{-1}.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.3, 1.1, -0.8, 0.4, 0.2, -0.9]);
        let y = DVector::from_row_slice(&[0.1, 0.5, -0.4, 0.9]);
        let data = Dataset::new(x, y).unwrap();
        let prior = PriorSpec {
            beta0: DVector::zeros(2),
            v: DMatrix::identity(2, 2) * 2.0,
            sigma2: Some(1.0),
        };
        let state = fit_posterior(&data, &prior).unwrap();
        let i = 0;
        let xi = data.row(i);
        let b = Cholesky::new(state.a() - &xi * xi.transpose())
            .unwrap()
            .inverse();
        let bx = &b * &xi;
        // Any vector with bx . x_new = 0 is orthogonal in the B metric.
        let x_new = DVector::from_row_slice(&[-bx[1], bx[0]]);
        let fast = swap_coefficients_fast(&state, &data, i, &x_new, 1.0).unwrap();
        assert_abs_diff_eq!(fast.d, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn batched_structure_matches_single_calls() {
        let x = DMatrix::from_row_slice(
            5,
            2,
            &[0.4, -0.2, 1.3, 0.8, -0.9, 0.5, 0.2, 1.9, -1.1, -0.6],
        );
        let y = DVector::from_row_slice(&[0.3, 1.9, -0.7, 2.5, -1.4]);
        let data = Dataset::new(x, y).unwrap();
        let prior = PriorSpec {
            beta0: DVector::from_row_slice(&[0.1, -0.2]),
            v: DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]),
            sigma2: Some(0.8),
        };
        let state = fit_posterior(&data, &prior).unwrap();
        let x_new = DVector::from_row_slice(&[0.6, -1.0]);
        let batch = swap_all_fast(&state, &data, &x_new, 0.8).unwrap();
        for i in 0..data.n() {
            let single = swap_coefficients_fast(&state, &data, i, &x_new, 0.8).unwrap();
            assert_abs_diff_eq!(batch[i].c, single.c, epsilon = 1e-13);
            assert_abs_diff_eq!(batch[i].d, single.d, epsilon = 1e-13);
            assert_abs_diff_eq!(batch[i].delta_lev, single.delta_lev, epsilon = 1e-13);
            assert_abs_diff_eq!(batch[i].s1_sq, single.s1_sq, epsilon = 1e-13);
        }
        let structure = swap_structure(&state, &data, &x_new).unwrap();
        assert_abs_diff_eq!(
            structure.map_prediction,
            x_new.dot(state.beta_hat()),
            epsilon = 1e-14
        );
        for i in 0..data.n() {
            let loo = loo_predictive(&state, &data, i, 0.8).unwrap();
            let term = structure.terms[i].loo_at(0.8);
            assert_abs_diff_eq!(term.m2, loo.m2, epsilon = 1e-13);
            assert_abs_diff_eq!(term.s2_sq, loo.s2_sq, epsilon = 1e-13);
        }
    }

    #[test]
    fn identity_basis_returns_input() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let out = basis_expand(&x, &BasisSpec::Identity).unwrap();
        assert_eq!(out.z, x);
        assert!(!out.ill_posed);
    }

    #[test]
    fn quadratic_basis_on_a_scalar() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let out = basis_expand(&x, &BasisSpec::Polynomial { degree: 2 }).unwrap();
        let expected = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 1.0, 2.0, 4.0]);
        assert_eq!(out.z, expected);
    }

    #[test]
    fn spline_basis_is_continuous_at_its_knots() {
        let knot = 0.75;
        let basis = BasisSpec::TruncatedPowerSpline {
            degree: 2,
            knots: vec![knot],
        };
        let eps = 1e-8;
        let x = DMatrix::from_row_slice(2, 1, &[knot - eps, knot + eps]);
        let out = basis_expand(&x, &basis).unwrap();
        for col in 0..out.z.ncols() {
            assert!(
                (out.z[(0, col)] - out.z[(1, col)]).abs() <= 1e-7,
                "column {col} jumps across the knot"
            );
        }
    }

    #[test]
    fn overcomplete_basis_is_flagged_not_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let out = basis_expand(
            &x,
            &BasisSpec::TruncatedPowerSpline {
                degree: 3,
                knots: vec![0.2, 0.4],
            },
        )
        .unwrap();
        assert_eq!(out.z.ncols(), 1 + 2 * (3 + 2));
        assert!(out.ill_posed);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(Dataset::new(DMatrix::zeros(1, 1), DVector::zeros(1)).is_err());
        assert!(Dataset::new(
            DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]),
            DVector::zeros(2)
        )
        .is_err());
        let (data, _) = two_point_dataset();
        let bad_prior = PriorSpec {
            beta0: DVector::zeros(1),
            v: DMatrix::from_row_slice(1, 1, &[-1.0]),
            sigma2: Some(1.0),
        };
        assert!(matches!(
            fit_posterior(&data, &bad_prior),
            Err(CppError::NonSpdPrior)
        ));
        assert!(basis_expand(&DMatrix::zeros(2, 1), &BasisSpec::Polynomial { degree: 0 }).is_err());
    }
}
