//! Empirical verification of a claimed privacy guarantee.
//!
//! Given the original database and the released one, the realized transition
//! probabilities can be estimated per attribute by conditioning on the true
//! bit: `p̂_xy = #{true bit x, released bit y} / #{true bit x}`. The realized
//! budget is then the same worst-case log-likelihood ratio used for design
//! matrices, and the audit passes only if it stays within `slack` of the
//! target. The check is one-sided by design — an attribute with an empty
//! stratum or a zero transition cell can never pass, it is reported as
//! inconclusive or failed instead.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db::AttributeDatabase;
use crate::mechanism::{tightest_epsilon, PerturbationConfig, PrivacyBudget};

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("databases are not aligned: {0}")]
    Misaligned(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("stratum of records with true bit {0} is empty; transition row not estimable")]
    EmptyStratum(u8),
    #[error("slack {0} must be finite and non-negative")]
    InvalidSlack(f64),
}

/// Joint counts of (true bit, released bit) pairs for one attribute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumCounts {
    pub x0_y0: u64,
    pub x0_y1: u64,
    pub x1_y0: u64,
    pub x1_y1: u64,
}

impl StratumCounts {
    /// Size of the stratum with true bit 0.
    pub fn x0(&self) -> u64 {
        self.x0_y0 + self.x0_y1
    }

    /// Size of the stratum with true bit 1.
    pub fn x1(&self) -> u64 {
        self.x1_y0 + self.x1_y1
    }
}

/// Empirically estimated transition matrix. Unlike a design matrix, entries
/// may sit on the boundary: a cell the mechanism never produced estimates to
/// exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMatrix {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl EmpiricalMatrix {
    /// Row-normalizes the counts. Each off-diagonal is derived as the
    /// complement of its diagonal, so rows sum to exactly 1.
    pub fn from_counts(counts: &StratumCounts) -> Result<Self, AuditError> {
        if counts.x0() == 0 {
            return Err(AuditError::EmptyStratum(0));
        }
        if counts.x1() == 0 {
            return Err(AuditError::EmptyStratum(1));
        }
        let p00 = counts.x0_y0 as f64 / counts.x0() as f64;
        let p11 = counts.x1_y1 as f64 / counts.x1() as f64;
        Ok(Self {
            p00,
            p01: 1.0 - p00,
            p10: 1.0 - p11,
            p11,
        })
    }

    /// Realized budget of the estimated matrix; `+∞` when any cell is zero.
    pub fn epsilon(&self) -> f64 {
        tightest_epsilon(self.p00, self.p01, self.p10, self.p11)
    }
}

/// Tallies (true, released) pairs for one attribute across aligned databases.
pub fn stratum_counts(
    original: &AttributeDatabase,
    perturbed: &AttributeDatabase,
    name: &str,
) -> Result<StratumCounts, AuditError> {
    if let Some(reason) = original.alignment_mismatch(perturbed) {
        return Err(AuditError::Misaligned(reason));
    }
    let idx = original
        .schema()
        .index_of(name)
        .ok_or_else(|| AuditError::UnknownAttribute(name.to_string()))?;
    let mut counts = StratumCounts::default();
    for (orig, pert) in original.records().iter().zip(perturbed.records()) {
        match (orig.bits()[idx], pert.bits()[idx]) {
            (0, 0) => counts.x0_y0 += 1,
            (0, _) => counts.x0_y1 += 1,
            (_, 0) => counts.x1_y0 += 1,
            (_, _) => counts.x1_y1 += 1,
        }
    }
    Ok(counts)
}

/// Estimates the realized transition matrix for one attribute.
pub fn empirical_design_matrix(
    original: &AttributeDatabase,
    perturbed: &AttributeDatabase,
    name: &str,
) -> Result<EmpiricalMatrix, AuditError> {
    EmpiricalMatrix::from_counts(&stratum_counts(original, perturbed, name)?)
}

/// Per-attribute audit verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// A stratum was empty, so the realized matrix could not be estimated.
    /// Deliberately distinct from `Pass`: absence of evidence is not a
    /// certificate.
    Inconclusive,
}

/// Everything the audit learned about one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeAudit {
    pub counts: StratumCounts,
    /// `None` when a stratum was empty.
    pub empirical_matrix: Option<EmpiricalMatrix>,
    /// Realized budget; serialized as the string `"inf"` when a zero cell
    /// pushes it to infinity, `null` when not estimable.
    #[serde(with = "maybe_infinite")]
    pub empirical_epsilon: Option<f64>,
    /// What the config's matrix promises for this attribute.
    pub target_epsilon: PrivacyBudget,
    pub verdict: Verdict,
}

/// Full audit report across the configured attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Additive tolerance on the realized budget, absorbing sampling noise.
    pub slack: f64,
    pub attributes: BTreeMap<String, AttributeAudit>,
    /// `fail` if any attribute failed, else `inconclusive` if any attribute
    /// was, else `pass`.
    pub overall: Verdict,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Audits every configured attribute of a release against its target budget.
///
/// An attribute passes iff its realized budget is at most `target + slack`.
/// Empty strata make an attribute inconclusive rather than passing; a zero
/// transition cell makes the realized budget infinite, which fails.
pub fn audit(
    original: &AttributeDatabase,
    perturbed: &AttributeDatabase,
    config: &PerturbationConfig,
    slack: f64,
) -> Result<AuditReport, AuditError> {
    if !slack.is_finite() || slack < 0.0 {
        return Err(AuditError::InvalidSlack(slack));
    }
    if let Some(reason) = original.alignment_mismatch(perturbed) {
        return Err(AuditError::Misaligned(reason));
    }
    let mut attributes = BTreeMap::new();
    for (name, matrix) in &config.attributes {
        let counts = stratum_counts(original, perturbed, name)?;
        let target_epsilon = matrix.epsilon();
        let entry = match EmpiricalMatrix::from_counts(&counts) {
            Err(_) => AttributeAudit {
                counts,
                empirical_matrix: None,
                empirical_epsilon: None,
                target_epsilon,
                verdict: Verdict::Inconclusive,
            },
            Ok(empirical) => {
                let realized = empirical.epsilon();
                // `+∞ <= anything` is false, so a zero cell always fails.
                let verdict = if realized <= target_epsilon.nats() + slack {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                AttributeAudit {
                    counts,
                    empirical_matrix: Some(empirical),
                    empirical_epsilon: Some(realized),
                    target_epsilon,
                    verdict,
                }
            }
        };
        attributes.insert(name.clone(), entry);
    }
    let overall = if attributes.values().any(|a| a.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if attributes.values().any(|a| a.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(AuditReport {
        slack,
        attributes,
        overall,
    })
}

/// Serde adapter for `Option<f64>` where infinity must survive JSON:
/// `None ↦ null`, finite ↦ number, infinite ↦ the string `"inf"`.
mod maybe_infinite {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
        match value {
            None => ser.serialize_none(),
            Some(x) if x.is_finite() => ser.serialize_f64(*x),
            Some(_) => ser.serialize_str("inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<f64>, D::Error> {
        let value = Option::<serde_json::Value>::deserialize(de)?;
        match value {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::Number(n)) => n
                .as_f64()
                .map(Some)
                .ok_or_else(|| D::Error::custom("unrepresentable number")),
            Some(serde_json::Value::String(s)) if s == "inf" => Ok(Some(f64::INFINITY)),
            Some(other) => Err(D::Error::custom(format!(
                "expected null, a number, or \"inf\", found {other}"
            ))),
        }
    }
}
