//! Outlier identification rules and the repeated random-split plan.
//!
//! The evaluation protocol holds every identified outlier out in each test
//! set and fills the remainder with a fresh random draw of clean
//! observations, so the robust predictor is always trained on data that
//! still contains no held-out point and scored on both strata.

use std::collections::BTreeSet;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PredictError, Result};

/// How the held-out outlier set is determined. The tool never invents its
/// own detector: the rule is always an explicit input.
#[derive(Debug, Clone, PartialEq)]
pub enum OutlierRule {
    /// Explicit 1-based observation numbers (complete-case numbering).
    Indices(Vec<usize>),
    /// Observations whose externally studentized residual from an
    /// ordinary-least-squares fit with intercept exceeds the threshold in
    /// absolute value.
    StudentizedResidual { threshold: f64 },
    /// Observations whose response falls outside the k-times-IQR fences
    /// around the quartiles.
    IqrFence { k: f64 },
}

impl FromStr for OutlierRule {
    type Err = PredictError;

    /// Parses `indices:1,5,9`, `studentized:2.5`, or `iqr:1.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = s.split_once(':').ok_or_else(|| {
            PredictError::Argument(format!(
                "outlier rule '{s}' must look like indices:1,5,9 or studentized:2.5 or iqr:1.5"
            ))
        })?;
        match head {
            "indices" => {
                let mut seen = BTreeSet::new();
                for part in tail.split(',') {
                    let idx: usize = part.trim().parse().map_err(|_| {
                        PredictError::Argument(format!(
                            "outlier index '{part}' is not a positive integer"
                        ))
                    })?;
                    if idx == 0 {
                        return Err(PredictError::Argument(
                            "outlier indices are 1-based; 0 is not a valid observation".into(),
                        ));
                    }
                    seen.insert(idx);
                }
                if seen.is_empty() {
                    return Err(PredictError::Argument(
                        "the indices rule needs at least one index".into(),
                    ));
                }
                Ok(OutlierRule::Indices(seen.into_iter().collect()))
            }
            "studentized" => {
                let threshold: f64 = tail.trim().parse().map_err(|_| {
                    PredictError::Argument(format!("threshold '{tail}' is not a number"))
                })?;
                if !(threshold.is_finite() && threshold > 0.0) {
                    return Err(PredictError::Argument(format!(
                        "studentized threshold must be positive (got {threshold})"
                    )));
                }
                Ok(OutlierRule::StudentizedResidual { threshold })
            }
            "iqr" => {
                let k: f64 = tail.trim().parse().map_err(|_| {
                    PredictError::Argument(format!("fence multiplier '{tail}' is not a number"))
                })?;
                if !(k.is_finite() && k > 0.0) {
                    return Err(PredictError::Argument(format!(
                        "fence multiplier must be positive (got {k})"
                    )));
                }
                Ok(OutlierRule::IqrFence { k })
            }
            other => Err(PredictError::Argument(format!(
                "unknown outlier rule '{other}' (expected indices, studentized, or iqr)"
            ))),
        }
    }
}

/// Linear-interpolation quantile on the order statistics (the convention
/// used by R's default and NumPy's `linear` method): with `h = (n−1)p`, the
/// quantile is `x(⌊h⌋) + (h−⌊h⌋)·(x(⌊h⌋+1) − x(⌊h⌋))` on the sorted sample.
pub fn quantile_type7(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(PredictError::Argument(
            "quantile of an empty sample".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(PredictError::Argument(format!(
            "quantile level must lie in [0, 1] (got {p})"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - h.floor();
    if lo + 1 < sorted.len() {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    } else {
        Ok(sorted[lo])
    }
}

/// Externally studentized residuals of an ordinary-least-squares fit with an
/// intercept prepended to the covariates. With `r_i` the internally
/// studentized residual and `m` the number of fitted coefficients, the
/// deleted version is `t_i = r_i · √((n−m−1)/(n−m−r_i²))`, distributed
/// t(n−m−1) under the Gaussian model.
pub fn externally_studentized_residuals(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<f64>> {
    let n = x.nrows();
    let m = x.ncols() + 1;
    if n < m + 2 {
        return Err(PredictError::Argument(format!(
            "studentized residuals need at least {} observations for {} coefficients (got {n})",
            m + 2,
            m - 1
        )));
    }
    let mut design = DMatrix::zeros(n, m);
    design.column_mut(0).fill(1.0);
    for c in 0..x.ncols() {
        design.set_column(c + 1, &x.column(c));
    }
    let xtx = design.transpose() * &design;
    let chol = nalgebra::Cholesky::new(xtx).ok_or_else(|| {
        PredictError::Argument(
            "design matrix is rank deficient; studentized residuals are undefined".into(),
        )
    })?;
    let beta = chol.solve(&(design.transpose() * y));
    let fitted = &design * &beta;
    let residuals = y - fitted;
    let dof = (n - m) as f64;
    let s2 = residuals.dot(&residuals) / dof;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let xi = design.row(i).transpose();
        let leverage = xi.dot(&chol.solve(&xi));
        let denom = s2 * (1.0 - leverage);
        if denom <= 0.0 {
            return Err(PredictError::Argument(format!(
                "observation {} has leverage 1; its residual cannot be studentized",
                i + 1
            )));
        }
        let r = residuals[i] / denom.sqrt();
        let guard = dof - r * r;
        if guard <= 0.0 {
            return Err(PredictError::Argument(format!(
                "observation {} produces a degenerate deleted variance",
                i + 1
            )));
        }
        out.push(r * ((dof - 1.0) / guard).sqrt());
    }
    Ok(out)
}

/// Applies an outlier rule, returning sorted 0-based row indices.
pub fn detect_outliers(x: &DMatrix<f64>, y: &DVector<f64>, rule: &OutlierRule) -> Result<Vec<usize>> {
    let n = y.len();
    match rule {
        OutlierRule::Indices(one_based) => {
            let mut out = Vec::with_capacity(one_based.len());
            for &idx in one_based {
                if idx > n {
                    return Err(PredictError::Argument(format!(
                        "outlier index {idx} exceeds the {n} complete observations"
                    )));
                }
                out.push(idx - 1);
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        }
        OutlierRule::StudentizedResidual { threshold } => {
            let t = externally_studentized_residuals(x, y)?;
            Ok(t.iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > *threshold)
                .map(|(i, _)| i)
                .collect())
        }
        OutlierRule::IqrFence { k } => {
            let values: Vec<f64> = y.iter().copied().collect();
            let q1 = quantile_type7(&values, 0.25)?;
            let q3 = quantile_type7(&values, 0.75)?;
            let iqr = q3 - q1;
            let lo = q1 - k * iqr;
            let hi = q3 + k * iqr;
            Ok(values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v < lo || **v > hi)
                .map(|(i, _)| i)
                .collect())
        }
    }
}

/// Plan for the repeated random-split protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    /// Number of random splits.
    pub n_splits: usize,
    /// 0-based indices held out in every test set.
    pub outlier_indices: Vec<usize>,
    /// Clean observations drawn into each test set.
    pub n_clean_test: usize,
    /// Seed; each split uses its own stream of the same generator.
    pub seed: u64,
}

/// One train/test partition, both sides sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// Training rows.
    pub train: Vec<usize>,
    /// Test rows: every planned outlier plus the split's clean draw.
    pub test: Vec<usize>,
}

/// Draws the split list: every test set contains all planned outliers plus
/// `n_clean_test` distinct clean rows; the outliers never appear in any
/// training set. Deterministic in the plan's seed, with the clean draws as
/// the only seed-dependent part.
pub fn make_splits(n: usize, plan: &SplitPlan) -> Result<Vec<Split>> {
    if plan.n_splits == 0 {
        return Err(PredictError::Argument(
            "the split plan needs at least one split".into(),
        ));
    }
    let outliers: BTreeSet<usize> = plan.outlier_indices.iter().copied().collect();
    if let Some(&bad) = outliers.iter().find(|&&i| i >= n) {
        return Err(PredictError::Argument(format!(
            "outlier index {bad} is out of range for {n} observations"
        )));
    }
    let clean: Vec<usize> = (0..n).filter(|i| !outliers.contains(i)).collect();
    if plan.n_clean_test == 0 || plan.n_clean_test > clean.len() {
        return Err(PredictError::Argument(format!(
            "cannot hold out {} clean observations from a pool of {}",
            plan.n_clean_test,
            clean.len()
        )));
    }
    if plan.n_clean_test == clean.len() {
        return Err(PredictError::Argument(
            "every clean observation would be held out, leaving no training data".into(),
        ));
    }
    let mut splits = Vec::with_capacity(plan.n_splits);
    for s in 0..plan.n_splits {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(s as u64);
        let picks = rand::seq::index::sample(&mut rng, clean.len(), plan.n_clean_test);
        let mut test: Vec<usize> = picks.iter().map(|k| clean[k]).collect();
        test.extend(outliers.iter().copied());
        test.sort_unstable();
        let test_set: BTreeSet<usize> = test.iter().copied().collect();
        let train: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
        splits.push(Split { train, test });
    }
    Ok(splits)
}
