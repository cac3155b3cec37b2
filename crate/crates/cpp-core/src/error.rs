//! Error type shared across the conjugate, GP, divergence, solver, and
//! simulation modules.
//!
//! Degeneracies that would silently corrupt a divergence (a leverage at 1, a
//! collapsed augmentation denominator, a non-positive leave-one-out precision)
//! are hard errors rather than clamps: the downstream predictive variances
//! divide by these quantities.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Error)]
pub enum CppError {
    /// Input shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A numeric argument is outside its valid range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The prior scale matrix failed its Cholesky factorization.
    #[error("prior scale matrix is not symmetric positive definite")]
    NonSpdPrior,

    /// The regularized normal-equations matrix failed its factorization.
    #[error("posterior system matrix is singular or not positive definite")]
    SingularSystem,

    /// Leverage within 1e-12 of 1: the leave-one-out variance diverges.
    #[error("observation {0} has leverage within 1e-12 of 1; its leave-one-out variance diverges")]
    DegenerateLeverage(usize),

    /// The rank-one augmentation denominator collapsed.
    #[error("observation {0}: augmentation denominator is not positive; swapped system is degenerate")]
    DegenerateAugmentation(usize),

    /// A from-scratch swapped system could not be factorized.
    #[error("observation {0}: swapped system matrix is singular")]
    SingularAugmentedSystem(usize),

    /// The kernel covariance (plus noise and jitter) is not positive definite.
    #[error("kernel covariance matrix is not positive definite")]
    NonPdKernel,

    /// The swapped kernel covariance is not positive definite.
    #[error("observation {0}: swapped kernel covariance is not positive definite")]
    NonPdAugmented(usize),

    /// A leave-one-out precision entry is not positive.
    #[error("observation {0}: inverse-covariance diagonal is not positive; leave-one-out undefined")]
    DegenerateLoo(usize),

    /// The probed swapped mean failed its three-point affinity check.
    #[error("observation {0}: swapped predictive mean is not affine in the candidate")]
    NonAffineSwap(usize),

    /// Every swap slope d_i vanishes, so the objective ignores the candidate.
    #[error("every swap slope d_i is zero; the objective does not depend on the candidate")]
    AllDZero,

    /// Inverse-gamma posterior parameters must be strictly positive.
    #[error("inverse-gamma parameters must be positive (shape {shape}, scale {scale})")]
    NonPositiveIgParams { shape: f64, scale: f64 },

    /// A per-draw solve failed inside a draw-averaging routine.
    #[error("posterior draw {draw} failed: {source}")]
    DrawFailed {
        draw: usize,
        #[source]
        source: Box<CppError>,
    },

    /// Every posterior draw ended on the search-window boundary.
    #[error("all posterior draws produced boundary minima; no usable solutions")]
    AllDrawsAtBoundary,

    /// Catch-all for solver-internal failures.
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CppError>;
