//! Gaussian-process regression with known noise variance.
//!
//! The latent function carries a constant mean `m` and covariance kernel
//! `k`; observations add independent `N(0, sigma2)` noise, so the training
//! covariance is `Sigma = K + sigma2 I` (plus a tiny diagonal jitter scaled
//! by the kernel's signal variance, added before factorization).
//!
//! Predictions at a point `x*` follow the usual conditional-Gaussian rules.
//! The leave-one-out predictive of `y_i` comes directly from the precision
//! matrix `P = Sigma^{-1}`: its mean is `y_i - alpha_i / P_ii` with
//! `alpha = P (y - m)`, and its variance is `1 / P_ii`.
//!
//! Swapping observation `i`'s input for a candidate `x_new` perturbs
//! `Sigma` only in row and column `i`, a symmetric rank-two change
//! `Sigma_aug = Sigma + e_i w' + w e_i'` with `w = delta - delta_i e_i / 2`,
//! where `delta` is the change in row `i`. The fast path resolves
//! `Sigma_aug^{-1}` through the Woodbury identity against the stored `P`;
//! a from-scratch rebuild of the swapped system is kept alongside as the
//! testing oracle. Because the candidate response enters the swapped
//! predictive mean linearly, evaluating the mean at two probe responses
//! recovers its affine coefficients exactly; a third probe cross-checks
//! affinity and fails loudly if violated.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2, Vector2};

use crate::conjugate::{Dataset, LooPredictive, SwapCoefficients};
use crate::error::{CppError, Result};

/// Relative diagonal jitter added to the training covariance.
pub const KERNEL_JITTER: f64 = 1e-10;

/// Precision diagonal entries at or below this are treated as degenerate.
pub const LOO_PRECISION_GUARD: f64 = 1e-14;

/// Covariance kernel families.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `k(x, x') = exp(-|x - x'|^2 / (2 l^2))`, scaled by the signal variance.
    SquaredExponential {
        /// Length scale `l`; must be positive.
        length_scale: f64,
    },
    /// `k(x, x') = x' x`, scaled by the signal variance.
    Linear,
}

/// A kernel family together with its signal variance.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    /// Kernel family.
    pub kind: KernelKind,
    /// Multiplicative signal variance; must be positive.
    pub signal_var: f64,
}

impl KernelSpec {
    /// Kernel value between two covariate vectors.
    pub fn eval(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match &self.kind {
            KernelKind::SquaredExponential { length_scale } => {
                let sq = (a - b).norm_squared();
                self.signal_var * (-sq / (2.0 * length_scale * length_scale)).exp()
            }
            KernelKind::Linear => self.signal_var * a.dot(b),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.signal_var.is_finite() && self.signal_var > 0.0) {
            return Err(CppError::InvalidArgument(format!(
                "signal variance must be positive (got {})",
                self.signal_var
            )));
        }
        if let KernelKind::SquaredExponential { length_scale } = self.kind {
            if !(length_scale.is_finite() && length_scale > 0.0) {
                return Err(CppError::InvalidArgument(format!(
                    "length scale must be positive (got {length_scale})"
                )));
            }
        }
        Ok(())
    }
}

/// A fitted Gaussian-process regression model.
#[derive(Debug, Clone)]
pub struct GpModel {
    data: Dataset,
    kernel: KernelSpec,
    mean: f64,
    sigma2: f64,
    sigma: DMatrix<f64>,
    sigma_chol: Cholesky<f64, nalgebra::Dyn>,
    sigma_inv: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Training data.
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Kernel specification.
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Constant prior mean.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Known noise variance.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Training covariance `K + sigma2 I` (jitter included).
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Explicit precision matrix `P = Sigma^{-1}`.
    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// Cross-covariance vector between the training inputs and `x_new`.
    fn cross_cov(&self, x_new: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.data.n(), |j, _| {
            self.kernel.eval(&self.data.row(j), x_new)
        })
    }
}

/// Fits a Gaussian-process model, factorizing the training covariance once.
pub fn gp_fit(data: &Dataset, kernel: &KernelSpec, mean: f64, sigma2: f64) -> Result<GpModel> {
    kernel.validate()?;
    if !mean.is_finite() {
        return Err(CppError::InvalidArgument(
            "prior mean must be finite".into(),
        ));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(CppError::InvalidArgument(format!(
            "noise variance must be positive (got {sigma2})"
        )));
    }
    let n = data.n();
    let mut sigma = DMatrix::from_fn(n, n, |i, j| {
        if i <= j {
            kernel.eval(&data.row(i), &data.row(j))
        } else {
            0.0
        }
    });
    sigma.fill_lower_triangle_with_upper_triangle();
    let ridge = sigma2 + KERNEL_JITTER * kernel.signal_var;
    for i in 0..n {
        sigma[(i, i)] += ridge;
    }
    let sigma_chol = Cholesky::new(sigma.clone()).ok_or(CppError::NonPdKernel)?;
    let sigma_inv = sigma_chol.inverse();
    let centered = data.y().map(|v| v - mean);
    let alpha = sigma_chol.solve(&centered);
    Ok(GpModel {
        data: data.clone(),
        kernel: kernel.clone(),
        mean,
        sigma2,
        sigma,
        sigma_chol,
        sigma_inv,
        alpha,
    })
}

/// Predictive mean and variance (noise included) at a new covariate vector.
pub fn gp_predictive(model: &GpModel, x_new: &DVector<f64>) -> Result<(f64, f64)> {
    check_candidate(model.data(), x_new)?;
    let k_new = model.cross_cov(x_new);
    let mean = model.mean + k_new.dot(&model.alpha);
    let f_var = model.kernel.eval(x_new, x_new) - k_new.dot(&model.sigma_chol.solve(&k_new));
    let f_var = clamp_latent_variance(f_var, model.kernel.signal_var)?;
    Ok((mean, f_var + model.sigma2))
}

/// Leave-one-out predictive of `y_i`, read off the precision matrix.
pub fn gp_loo_predictive(model: &GpModel, i: usize) -> Result<LooPredictive> {
    if i >= model.data.n() {
        return Err(CppError::InvalidArgument(format!(
            "observation index {i} out of range for {} observations",
            model.data.n()
        )));
    }
    let p_ii = model.sigma_inv[(i, i)];
    if p_ii <= LOO_PRECISION_GUARD {
        return Err(CppError::DegenerateLoo(i));
    }
    Ok(LooPredictive {
        m2: model.data.y()[i] - model.alpha[i] / p_ii,
        s2_sq: 1.0 / p_ii,
    })
}

/// Internal handle on the swapped system: applies `Sigma_aug^{-1}` without
/// ever forming `Sigma_aug` (Woodbury route), or via a fresh factorization
/// (naive route).
enum SwappedSolve<'m> {
    Woodbury {
        model: &'m GpModel,
        u1: DVector<f64>, // P e_i
        u2: DVector<f64>, // P w
        s_inv: Matrix2<f64>,
    },
    Naive {
        chol: Cholesky<f64, nalgebra::Dyn>,
    },
}

impl SwappedSolve<'_> {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            SwappedSolve::Woodbury { model, u1, u2, s_inv } => {
                let base = model.sigma_chol.solve(rhs);
                let proj = Vector2::new(u1.dot(rhs), u2.dot(rhs));
                let coef = s_inv * proj;
                base - u1 * coef[0] - u2 * coef[1]
            }
            SwappedSolve::Naive { chol } => chol.solve(rhs),
        }
    }
}

/// Row-`i` covariance change when input `i` moves from `x_i` to `x_new`.
fn swap_row_delta(model: &GpModel, i: usize, x_new: &DVector<f64>) -> DVector<f64> {
    let xi = model.data.row(i);
    DVector::from_fn(model.data.n(), |j, _| {
        if j == i {
            model.kernel.eval(x_new, x_new) - model.kernel.eval(&xi, &xi)
        } else {
            let xj = model.data.row(j);
            model.kernel.eval(&xj, x_new) - model.kernel.eval(&xj, &xi)
        }
    })
}

fn woodbury_solve<'m>(model: &'m GpModel, i: usize, x_new: &DVector<f64>) -> Result<SwappedSolve<'m>> {
    // Sigma_aug = Sigma + e_i w' + w e_i' = Sigma + U M U' with
    // U = [e_i, w], M = [[0, 1], [1, 0]] (self-inverse), and
    // w = delta - delta_i e_i / 2 so the (i, i) entry is counted once.
    let mut w = swap_row_delta(model, i, x_new);
    w[i] *= 0.5;
    let mut e_i = DVector::zeros(model.data.n());
    e_i[i] = 1.0;
    let u1 = model.sigma_chol.solve(&e_i);
    let u2 = model.sigma_chol.solve(&w);
    // S = M^{-1} + U' P U; Woodbury gives
    // Sigma_aug^{-1} = P - [u1 u2] S^{-1} [u1 u2]'.
    let s = Matrix2::new(
        u1.dot(&e_i),
        1.0 + u1.dot(&w),
        1.0 + u2.dot(&e_i),
        u2.dot(&w),
    );
    let s_inv = s.try_inverse().ok_or(CppError::NonPdAugmented(i))?;
    Ok(SwappedSolve::Woodbury { model, u1, u2, s_inv })
}

fn naive_solve(model: &GpModel, i: usize, x_new: &DVector<f64>) -> Result<SwappedSolve<'static>> {
    let n = model.data.n();
    let mut sigma_aug = model.sigma.clone();
    let delta = swap_row_delta(model, i, x_new);
    for j in 0..n {
        if j == i {
            sigma_aug[(i, i)] += delta[i];
        } else {
            sigma_aug[(i, j)] += delta[j];
            sigma_aug[(j, i)] += delta[j];
        }
    }
    let chol = Cholesky::new(sigma_aug).ok_or(CppError::NonPdAugmented(i))?;
    Ok(SwappedSolve::Naive { chol })
}

fn swap_from_solver(
    model: &GpModel,
    i: usize,
    x_new: &DVector<f64>,
    solver: &SwappedSolve<'_>,
) -> Result<SwapCoefficients> {
    let n = model.data.n();
    let xi = model.data.row(i);
    // Cross-covariance between the swapped training inputs and the query x_i.
    let mut k_q = model.cross_cov(&xi);
    k_q[i] = model.kernel.eval(x_new, &xi);
    let sol = solver.solve(&k_q);

    // The swapped predictive mean at candidate response a is
    // m + k_q' Sigma_aug^{-1} (y_swap(a) - m); affine in a. Two probe
    // responses pin (c, d); a third certifies affinity.
    let resid = model.data.y().map(|v| v - model.mean);
    let mean_at = |resid_i: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..n {
            acc += sol[j] * if j == i { resid_i } else { resid[j] };
        }
        model.mean + acc
    };
    let m_at_0 = mean_at(0.0 - model.mean);
    let m_at_1 = mean_at(1.0 - model.mean);
    let m_at_neg1 = mean_at(-1.0 - model.mean);
    let c = m_at_0;
    let d = m_at_1 - m_at_0;
    let scale = 1.0_f64.max(m_at_0.abs()).max(m_at_1.abs());
    if (m_at_neg1 - (c - d)).abs() > 1e-10 * scale {
        return Err(CppError::NonAffineSwap(i));
    }

    let f_var = model.kernel.eval(&xi, &xi) - k_q.dot(&sol);
    let f_var = clamp_latent_variance(f_var, model.kernel.signal_var)
        .map_err(|_| CppError::NonPdAugmented(i))?;
    let s1_sq = f_var + model.sigma2;
    Ok(SwapCoefficients {
        c,
        d,
        s1_sq,
        delta_lev: s1_sq / model.sigma2 - 1.0,
    })
}

/// Swapped-predictive coefficients via the Woodbury rank-two update.
pub fn gp_swap_coefficients(
    model: &GpModel,
    i: usize,
    x_new: &DVector<f64>,
) -> Result<SwapCoefficients> {
    check_swap_args(model, i, x_new)?;
    let solver = woodbury_solve(model, i, x_new)?;
    swap_from_solver(model, i, x_new, &solver)
}

/// Swapped-predictive coefficients by refactorizing the swapped covariance
/// from scratch — the testing oracle for the Woodbury route.
pub fn gp_swap_coefficients_naive(
    model: &GpModel,
    i: usize,
    x_new: &DVector<f64>,
) -> Result<SwapCoefficients> {
    check_swap_args(model, i, x_new)?;
    let solver = naive_solve(model, i, x_new)?;
    swap_from_solver(model, i, x_new, &solver)
}

fn check_swap_args(model: &GpModel, i: usize, x_new: &DVector<f64>) -> Result<()> {
    if i >= model.data.n() {
        return Err(CppError::InvalidArgument(format!(
            "observation index {i} out of range for {} observations",
            model.data.n()
        )));
    }
    check_candidate(model.data(), x_new)
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

/// Rounds tiny negative latent variances (factorization round-off) up to
/// zero; anything below the slack indicates a broken covariance.
fn clamp_latent_variance(f_var: f64, signal_var: f64) -> Result<f64> {
    let slack = 1e-10 * signal_var.max(1.0);
    if f_var < -slack {
        return Err(CppError::NonPdKernel);
    }
    Ok(f_var.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::{fit_posterior, loo_predictive, swap_coefficients_fast, PriorSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn toy_model() -> GpModel {
        let x = DMatrix::from_row_slice(4, 1, &[-1.2, -0.3, 0.4, 1.5]);
        let y = DVector::from_row_slice(&[0.8, 0.1, -0.4, 1.1]);
        let data = Dataset::new(x, y).unwrap();
        let kernel = KernelSpec {
            kind: KernelKind::SquaredExponential { length_scale: 0.9 },
            signal_var: 1.3,
        };
        gp_fit(&data, &kernel, 0.2, 0.25).unwrap()
    }

    #[test]
    fn kernel_values_behave() {
        let se = KernelSpec {
            kind: KernelKind::SquaredExponential { length_scale: 2.0 },
            signal_var: 3.0,
        };
        let a = DVector::from_row_slice(&[1.0, 0.0]);
        let b = DVector::from_row_slice(&[1.0, 2.0]);
        assert_abs_diff_eq!(se.eval(&a, &a), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(se.eval(&a, &b), 3.0 * (-4.0 / 8.0_f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(se.eval(&a, &b), se.eval(&b, &a), epsilon = 0.0);
        let lin = KernelSpec {
            kind: KernelKind::Linear,
            signal_var: 0.5,
        };
        assert_abs_diff_eq!(lin.eval(&a, &b), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn near_noiseless_gp_interpolates_its_training_points() {
        let x = DMatrix::from_row_slice(3, 1, &[-1.0, 0.0, 1.0]);
        let y = DVector::from_row_slice(&[0.5, -0.2, 0.9]);
        let data = Dataset::new(x, y.clone()).unwrap();
        let kernel = KernelSpec {
            kind: KernelKind::SquaredExponential { length_scale: 1.0 },
            signal_var: 1.0,
        };
        let model = gp_fit(&data, &kernel, 0.0, 1e-8).unwrap();
        for i in 0..3 {
            let (mean, var) = gp_predictive(&model, &data.row(i)).unwrap();
            assert!((mean - y[i]).abs() < 1e-5, "mean {mean} vs {}", y[i]);
            assert!(var > 0.0 && var < 1e-4);
        }
    }

    #[test]
    fn loo_matches_a_literal_refit() {
        let model = toy_model();
        let n = model.data().n();
        for i in 0..n {
            let loo = gp_loo_predictive(&model, i).unwrap();
            // Refit on the other observations and predict at x_i.
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let x_sub = DMatrix::from_fn(n - 1, 1, |r, c| model.data().x()[(keep[r], c)]);
            let y_sub = DVector::from_fn(n - 1, |r, _| model.data().y()[keep[r]]);
            let sub = Dataset::new(x_sub, y_sub).unwrap();
            let sub_model = gp_fit(&sub, model.kernel(), model.mean(), model.sigma2()).unwrap();
            let (mean, var) = gp_predictive(&sub_model, &model.data().row(i)).unwrap();
            assert_abs_diff_eq!(loo.m2, mean, epsilon = 1e-9);
            assert_abs_diff_eq!(loo.s2_sq, var, epsilon = 1e-9);
        }
    }

    #[test]
    fn woodbury_swap_matches_the_naive_rebuild() {
        let model = toy_model();
        let x_new = DVector::from_row_slice(&[0.7]);
        for i in 0..model.data().n() {
            let fast = gp_swap_coefficients(&model, i, &x_new).unwrap();
            let naive = gp_swap_coefficients_naive(&model, i, &x_new).unwrap();
            assert_abs_diff_eq!(fast.c, naive.c, epsilon = 1e-11);
            assert_abs_diff_eq!(fast.d, naive.d, epsilon = 1e-11);
            assert_abs_diff_eq!(fast.s1_sq, naive.s1_sq, epsilon = 1e-11);
        }
    }

    #[test]
    fn swapped_mean_agrees_with_a_literal_swapped_refit() {
        let model = toy_model();
        let x_new = DVector::from_row_slice(&[0.9]);
        let i = 2;
        let coeff = gp_swap_coefficients(&model, i, &x_new).unwrap();
        for a in [-0.7, 0.0, 1.3] {
            // Build the swapped dataset explicitly and predict at x_i.
            let mut x = model.data().x().clone();
            x[(i, 0)] = x_new[0];
            let mut y = model.data().y().clone();
            y[i] = a;
            let swapped = Dataset::new(x, y).unwrap();
            let refit = gp_fit(&swapped, model.kernel(), model.mean(), model.sigma2()).unwrap();
            let (mean, var) = gp_predictive(&refit, &model.data().row(i)).unwrap();
            assert_abs_diff_eq!(coeff.c + coeff.d * a, mean, epsilon = 1e-9);
            assert_abs_diff_eq!(coeff.s1_sq, var, epsilon = 1e-9);
        }
    }

    #[test]
    fn linear_kernel_gp_matches_the_conjugate_linear_model() {
        // A linear-kernel GP with signal variance v, zero mean, and noise
        // sigma2 is the conjugate model with beta0 = 0 and V = (v / sigma2) I.
        let x = DMatrix::from_row_slice(5, 2, &[0.4, -0.2, 1.3, 0.8, -0.9, 0.5, 0.2, 1.9, -1.1, -0.6]);
        let y = DVector::from_row_slice(&[0.3, 1.9, -0.7, 2.5, -1.4]);
        let data = Dataset::new(x, y).unwrap();
        let v = 2.0;
        let sigma2 = 0.5;
        let kernel = KernelSpec {
            kind: KernelKind::Linear,
            signal_var: v,
        };
        let gp = gp_fit(&data, &kernel, 0.0, sigma2).unwrap();
        let prior = PriorSpec {
            beta0: DVector::zeros(2),
            v: DMatrix::identity(2, 2) * (v / sigma2),
            sigma2: Some(sigma2),
        };
        let state = fit_posterior(&data, &prior).unwrap();
        let x_new = DVector::from_row_slice(&[0.6, -1.0]);
        let (gp_mean, gp_var) = gp_predictive(&gp, &x_new).unwrap();
        let lin_mean = x_new.dot(state.beta_hat());
        let lin_var = sigma2 * (1.0 + x_new.dot(&(state.a_inv() * &x_new)));
        assert_abs_diff_eq!(gp_mean, lin_mean, epsilon = 1e-8);
        assert_abs_diff_eq!(gp_var, lin_var, epsilon = 1e-8);
        for i in 0..data.n() {
            let gp_loo = gp_loo_predictive(&gp, i).unwrap();
            let lin_loo = loo_predictive(&state, &data, i, sigma2).unwrap();
            assert_abs_diff_eq!(gp_loo.m2, lin_loo.m2, epsilon = 1e-8);
            assert_abs_diff_eq!(gp_loo.s2_sq, lin_loo.s2_sq, epsilon = 1e-8);
            let gp_swap = gp_swap_coefficients(&gp, i, &x_new).unwrap();
            let lin_swap = swap_coefficients_fast(&state, &data, i, &x_new, sigma2).unwrap();
            assert_abs_diff_eq!(gp_swap.c, lin_swap.c, epsilon = 1e-8);
            assert_abs_diff_eq!(gp_swap.d, lin_swap.d, epsilon = 1e-8);
            assert_abs_diff_eq!(gp_swap.s1_sq, lin_swap.s1_sq, epsilon = 1e-8);
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let y = DVector::from_row_slice(&[0.0, 1.0]);
        let data = Dataset::new(x, y).unwrap();
        let bad_kernel = KernelSpec {
            kind: KernelKind::SquaredExponential { length_scale: -1.0 },
            signal_var: 1.0,
        };
        assert!(gp_fit(&data, &bad_kernel, 0.0, 1.0).is_err());
        let kernel = KernelSpec {
            kind: KernelKind::Linear,
            signal_var: 1.0,
        };
        assert!(gp_fit(&data, &kernel, 0.0, -0.5).is_err());
        let model = gp_fit(&data, &kernel, 0.0, 1.0).unwrap();
        assert!(gp_swap_coefficients(&model, 5, &DVector::from_row_slice(&[1.0])).is_err());
        assert!(gp_predictive(&model, &DVector::from_row_slice(&[1.0, 2.0])).is_err());
    }
}
