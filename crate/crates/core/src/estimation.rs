//! Debiasing aggregate statistics from a perturbed release.
//!
//! Perturbation is applied record by record, but its effect on a frequency is
//! a known linear map: if a fraction π of true bits are 1, the released
//! fraction concentrates around `λ = π·p11 + (1-π)·p01`. Inverting that map
//! gives an unbiased point estimate
//!
//! ```text
//! π̂ = (λ̂ - p01) / (p11 - p01)
//! ```
//!
//! with variance `λ̂(1-λ̂) / (n·(p11-p01)²)` for a release of n records. The
//! estimator exists only when `p11 ≠ p01`; at equality the two rows respond
//! identically and the released frequency carries no information about π.

use serde::Serialize;
use thiserror::Error;

use crate::db::{AttributeDatabase, DbError};
use crate::mechanism::{DesignMatrix, PerturbationConfig};

/// `|p11 - p01|` below which the inversion is treated as singular.
pub const SINGULAR_GAP: f64 = 1e-12;

/// Half-width multiplier for a 95% normal confidence interval.
const Z_95: f64 = 1.96;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("matrix is singular for estimation: p11 - p01 = {gap} is within {SINGULAR_GAP} of zero")]
    SingularMatrix { gap: f64 },
    #[error("observed frequency {0} is not a proportion in [0, 1]")]
    InvalidProportion(f64),
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("databases are not aligned: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Db(#[from] DbError),
}

/// A debiased frequency estimate with its sampling uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    /// Unbiased point estimate; may fall outside [0, 1] by sampling noise.
    pub raw_point: f64,
    /// `raw_point` clamped to [0, 1] for reporting.
    pub clamped_point: f64,
    /// Variance of the estimator at the observed frequency.
    pub variance: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Number of released records behind the estimate.
    pub n: u64,
}

/// Inverts the response probabilities at an observed released frequency.
pub fn debias_frequency(
    observed: f64,
    matrix: &DesignMatrix,
    n: u64,
) -> Result<FrequencyEstimate, EstimationError> {
    if n == 0 {
        return Err(EstimationError::EmptySample);
    }
    if !(0.0..=1.0).contains(&observed) {
        return Err(EstimationError::InvalidProportion(observed));
    }
    let gap = matrix.p11() - matrix.p01();
    if gap.abs() < SINGULAR_GAP {
        return Err(EstimationError::SingularMatrix { gap });
    }
    let raw_point = (observed - matrix.p01()) / gap;
    let variance = observed * (1.0 - observed) / (n as f64 * gap * gap);
    let half = Z_95 * variance.sqrt();
    Ok(FrequencyEstimate {
        raw_point,
        clamped_point: raw_point.clamp(0.0, 1.0),
        variance,
        ci95_low: raw_point - half,
        ci95_high: raw_point + half,
        n,
    })
}

/// Fraction of records whose bit for `name` differs between the two aligned
/// databases. `1 - flip_rate` is the empirical keep-rate.
pub fn flip_rate(
    original: &AttributeDatabase,
    perturbed: &AttributeDatabase,
    name: &str,
) -> Result<f64, EstimationError> {
    if let Some(reason) = original.alignment_mismatch(perturbed) {
        return Err(EstimationError::Misaligned(reason));
    }
    let idx = original
        .schema()
        .index_of(name)
        .ok_or_else(|| DbError::UnknownAttribute(name.to_string()))?;
    if original.is_empty() {
        return Err(EstimationError::Db(DbError::EmptyDatabase));
    }
    let flips = original
        .records()
        .iter()
        .zip(perturbed.records())
        .filter(|(a, b)| a.bits()[idx] != b.bits()[idx])
        .count();
    Ok(flips as f64 / original.len() as f64)
}

/// One row of the utility report: how well one attribute's statistics
/// survived perturbation.
#[derive(Debug, Clone, Serialize)]
pub struct UtilityRow {
    pub attribute: String,
    /// Empirical fraction of records whose bit survived unchanged.
    pub keep_rate: f64,
    /// Frequency in the original database (needs the original, so this
    /// report is for the data owner, not the public).
    pub true_frequency: f64,
    pub estimate: FrequencyEstimate,
    /// `|estimate.raw_point - true_frequency|`.
    pub absolute_error: f64,
}

/// Builds one [`UtilityRow`] per configured attribute, in schema order.
/// An empty attribute set yields an empty report.
pub fn utility_report(
    original: &AttributeDatabase,
    perturbed: &AttributeDatabase,
    config: &PerturbationConfig,
) -> Result<Vec<UtilityRow>, EstimationError> {
    if let Some(reason) = original.alignment_mismatch(perturbed) {
        return Err(EstimationError::Misaligned(reason));
    }
    for name in config.attributes.keys() {
        if !original.schema().contains(name) {
            return Err(EstimationError::Db(DbError::UnknownAttribute(name.clone())));
        }
    }
    let mut rows = Vec::with_capacity(config.attributes.len());
    for name in original.schema().names() {
        let Some(matrix) = config.attributes.get(name) else {
            continue;
        };
        let keep_rate = 1.0 - flip_rate(original, perturbed, name)?;
        let true_frequency = original.frequency(name)?;
        let observed = perturbed.frequency(name)?;
        let estimate = debias_frequency(observed, matrix, perturbed.len() as u64)?;
        rows.push(UtilityRow {
            attribute: name.clone(),
            keep_rate,
            true_frequency,
            absolute_error: (estimate.raw_point - true_frequency).abs(),
            estimate,
        });
    }
    Ok(rows)
}

/// Renders a utility report as CSV with a fixed header. Float columns use
/// the shortest round-trip representation.
pub fn utility_report_csv(rows: &[UtilityRow]) -> String {
    let mut out =
        String::from("attribute,keep_rate,true_frequency,debiased_estimate,absolute_error\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.attribute,
            row.keep_rate,
            row.true_frequency,
            row.estimate.raw_point,
            row.absolute_error
        ));
    }
    out
}
