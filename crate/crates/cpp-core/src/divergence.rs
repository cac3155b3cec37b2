//! Closed-form divergence calculus between univariate Gaussians.
//!
//! Three divergences drive the candidate-selection objective:
//!
//! * negative log Bhattacharyya coefficient, with
//!   `BC = sqrt(2*s1*s2/S) * exp(-gap^2/(4S))`, `S = s1^2 + s2^2` — a
//!   quadratic-in-gap baseline whose score is linear and unbounded;
//! * squared Hellinger distance `H^2 = 1 - BC` — bounded with a redescending
//!   score;
//! * density power divergence with tuning parameter `alpha > 0`, in the
//!   alpha-scaled convention
//!   `dpd(p, q, alpha) = alpha*Int(q^{1+alpha}) - (1+alpha)*Int(p*q^alpha) + Int(p^{1+alpha})`,
//!   so that `alpha = 1` gives the squared L2 distance and
//!   `dpd/alpha -> KL(p||q)` as `alpha -> 0`.
//!
//! Score functions are the exact derivatives of each divergence with respect
//! to the mean gap `delta`, holding both variances fixed. Every formula is
//! evaluated in log-stable form: the Bhattacharyya variance factor is written
//! as `ln(2*s1*s2/S) = ln1p(-(s1-s2)^2/S)`, which is exact at equal variances
//! and does not underflow for extreme variance ratios.

use crate::error::{CppError, Result};

/// A univariate Gaussian distribution identified by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    /// Mean of the distribution.
    pub mean: f64,
    /// Variance of the distribution; strictly positive.
    pub var: f64,
}

impl GaussianLaw {
    /// Builds a law, rejecting non-finite means and non-positive variances.
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !var.is_finite() {
            return Err(CppError::InvalidArgument(format!(
                "gaussian law parameters must be finite (mean {mean}, var {var})"
            )));
        }
        if var <= 0.0 {
            return Err(CppError::InvalidArgument(format!(
                "gaussian law variance must be positive (got {var})"
            )));
        }
        Ok(Self { mean, var })
    }

    /// Log-density of the law at `y`.
    pub fn log_pdf(&self, y: f64) -> f64 {
        let z = y - self.mean;
        -0.5 * (2.0 * std::f64::consts::PI * self.var).ln() - z * z / (2.0 * self.var)
    }
}

/// Choice of divergence, carrying the power parameter when required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceKind {
    /// Negative log Bhattacharyya coefficient (quadratic baseline).
    LogBc,
    /// Squared Hellinger distance.
    Hellinger,
    /// Density power divergence with parameter `alpha > 0`.
    Dpd {
        /// Power parameter trading robustness against efficiency.
        alpha: f64,
    },
}

impl DivergenceKind {
    /// Checks the power parameter where one is carried.
    pub fn validate(&self) -> Result<()> {
        if let DivergenceKind::Dpd { alpha } = self {
            if !(alpha.is_finite() && *alpha > 0.0) {
                return Err(CppError::InvalidArgument(format!(
                    "dpd power parameter must be positive and finite (got {alpha})"
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the divergence between two laws.
    pub fn evaluate(&self, p: &GaussianLaw, q: &GaussianLaw) -> f64 {
        match *self {
            DivergenceKind::LogBc => neg_log_bc(p, q),
            DivergenceKind::Hellinger => hellinger_sq(p, q),
            DivergenceKind::Dpd { alpha } => dpd(p, q, alpha),
        }
    }

    /// Derivative of the per-term divergence in the mean gap.
    pub fn score(&self, delta: f64, s1_sq: f64, s2_sq: f64) -> f64 {
        match *self {
            DivergenceKind::LogBc => score_logbc(delta, s1_sq, s2_sq),
            DivergenceKind::Hellinger => score_hellinger(delta, s1_sq, s2_sq),
            DivergenceKind::Dpd { alpha } => score_dpd(delta, s1_sq, s2_sq, alpha),
        }
    }

    /// Radius of the interval of gaps on which the per-term divergence is convex.
    pub fn convexity_radius(&self, s1_sq: f64, s2_sq: f64) -> f64 {
        convexity_radius(*self, s1_sq, s2_sq)
    }

    /// Supremum of the absolute score over all gaps.
    pub fn score_bound(&self, s1_sq: f64, s2_sq: f64) -> f64 {
        score_bound(*self, s1_sq, s2_sq)
    }
}

/// `ln(2*s1*s2/S)` written as `ln1p(-(s1-s2)^2/S)`: exact at equal variances.
pub(crate) fn ln_var_factor(v1: f64, v2: f64) -> f64 {
    let s = v1 + v2;
    let ds = v1.sqrt() - v2.sqrt();
    (-ds * ds / s).ln_1p()
}

/// Bhattacharyya coefficient `Int(sqrt(p*q))` between two Gaussians, in `(0, 1]`.
pub fn bhattacharyya_coefficient(p: &GaussianLaw, q: &GaussianLaw) -> f64 {
    (-neg_log_bc(p, q)).exp()
}

/// Negative log Bhattacharyya coefficient, evaluated directly in log space.
pub fn neg_log_bc(p: &GaussianLaw, q: &GaussianLaw) -> f64 {
    let s = p.var + q.var;
    let gap = p.mean - q.mean;
    -0.5 * ln_var_factor(p.var, q.var) + gap * gap / (4.0 * s)
}

/// Squared Hellinger distance `1 - BC`, in `[0, 1)`; exactly zero at equality.
pub fn hellinger_sq(p: &GaussianLaw, q: &GaussianLaw) -> f64 {
    -(-neg_log_bc(p, q)).exp_m1()
}

/// Gaussian power integral `Int(N(.; m, v)^{1+alpha}) = (2 pi v)^{-alpha/2} (1+alpha)^{-1/2}`.
pub(crate) fn gaussian_power_integral(var: f64, alpha: f64) -> f64 {
    (2.0 * std::f64::consts::PI * var).powf(-0.5 * alpha) / (1.0 + alpha).sqrt()
}

/// Cross integral `Int(p * q^alpha)` for Gaussians `p`, `q`.
fn gaussian_cross_integral(p: &GaussianLaw, q: &GaussianLaw, alpha: f64) -> f64 {
    let gap = p.mean - q.mean;
    let denom = alpha * p.var + q.var;
    (2.0 * std::f64::consts::PI * q.var).powf(-0.5 * alpha)
        / (1.0 + alpha * p.var / q.var).sqrt()
        * (-alpha * gap * gap / (2.0 * denom)).exp()
}

/// Density power divergence between `p` and `q` in the alpha-scaled convention.
///
/// Grouped as `alpha*(Iq - Ipq) + (Ip - Ipq)` so that identical laws give an
/// exact zero.
pub fn dpd(p: &GaussianLaw, q: &GaussianLaw, alpha: f64) -> f64 {
    let iq = gaussian_power_integral(q.var, alpha);
    let ip = gaussian_power_integral(p.var, alpha);
    let ipq = gaussian_cross_integral(p, q, alpha);
    alpha * (iq - ipq) + (ip - ipq)
}

/// Score of the negative log Bhattacharyya divergence: linear, unbounded.
pub fn score_logbc(delta: f64, s1_sq: f64, s2_sq: f64) -> f64 {
    delta / (2.0 * (s1_sq + s2_sq))
}

/// Score of the squared Hellinger divergence: odd and redescending, with
/// maximal magnitude at `delta = sqrt(2S)`.
pub fn score_hellinger(delta: f64, s1_sq: f64, s2_sq: f64) -> f64 {
    let s = s1_sq + s2_sq;
    let c = (0.5 * ln_var_factor(s1_sq, s2_sq)).exp();
    c * delta / (2.0 * s) * (-delta * delta / (4.0 * s)).exp()
}

/// Per-term exponential rate and amplitude of the power-divergence score.
///
/// Returns `(kappa, w)` with `kappa = alpha / (2 (s2^2 + alpha s1^2))` and
/// `w = (2 pi s2^2)^{-alpha/2} (1 + alpha s1^2/s2^2)^{-1/2}`, so that the
/// gap-dependent part of the divergence is `-(1 + alpha) w exp(-kappa delta^2)`.
pub(crate) fn dpd_gap_coefficients(s1_sq: f64, s2_sq: f64, alpha: f64) -> (f64, f64) {
    let kappa = alpha / (2.0 * (s2_sq + alpha * s1_sq));
    let w = (2.0 * std::f64::consts::PI * s2_sq).powf(-0.5 * alpha)
        / (1.0 + alpha * s1_sq / s2_sq).sqrt();
    (kappa, w)
}

/// Score of the density power divergence: odd and redescending, with maximal
/// magnitude at `delta = 1/sqrt(2 kappa)`.
pub fn score_dpd(delta: f64, s1_sq: f64, s2_sq: f64, alpha: f64) -> f64 {
    let (kappa, w) = dpd_gap_coefficients(s1_sq, s2_sq, alpha);
    2.0 * kappa * (1.0 + alpha) * w * delta * (-kappa * delta * delta).exp()
}

/// Half-width of the gap interval on which the per-term divergence is convex.
///
/// Returns `+inf` for the log Bhattacharyya divergence, whose quadratic form
/// is globally convex.
pub fn convexity_radius(kind: DivergenceKind, s1_sq: f64, s2_sq: f64) -> f64 {
    match kind {
        DivergenceKind::LogBc => f64::INFINITY,
        DivergenceKind::Hellinger => (2.0 * (s1_sq + s2_sq)).sqrt(),
        DivergenceKind::Dpd { alpha } => {
            let (kappa, _) = dpd_gap_coefficients(s1_sq, s2_sq, alpha);
            1.0 / (2.0 * kappa).sqrt()
        }
    }
}

/// Supremum of the absolute score, attained at the convexity radius.
///
/// Returns `+inf` for the log Bhattacharyya divergence, whose linear score is
/// unbounded.
pub fn score_bound(kind: DivergenceKind, s1_sq: f64, s2_sq: f64) -> f64 {
    match kind {
        DivergenceKind::LogBc => f64::INFINITY,
        DivergenceKind::Hellinger => {
            score_hellinger(convexity_radius(kind, s1_sq, s2_sq), s1_sq, s2_sq).abs()
        }
        DivergenceKind::Dpd { alpha } => {
            score_dpd(convexity_radius(kind, s1_sq, s2_sq), s1_sq, s2_sq, alpha).abs()
        }
    }
}
