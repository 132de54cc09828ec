//! The randomized-response mechanism: 2×2 design matrices, their privacy
//! budgets, and deterministic database perturbation.
//!
//! A design matrix `P = [[p00, p01], [p10, p11]]` gives the probability
//! `p_xy` of releasing bit `y` for a true bit `x`. Rows are probability
//! distributions and every entry is strictly inside (0, 1), so both outputs
//! stay possible for both inputs — the condition under which the mechanism
//! has a finite budget at all. The smallest ε the matrix satisfies is
//!
//! ```text
//! ε = max( |ln(p00 / p10)|, |ln(p11 / p01)| )
//! ```
//!
//! the worst-case log-likelihood ratio between the two rows.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db::{AttributeDatabase, AttributeRecord, AttributeSchema};

/// Absolute tolerance for a matrix row to count as summing to 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Multiplicative slack used when checking `p ≤ e^ε · q`, so that a matrix
/// constructed *from* a budget round-trips through the check it came from.
pub const BUDGET_CHECK_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MechanismError {
    #[error("warner parameter {0} must lie strictly between 0 and 1 and differ from 1/2")]
    InvalidWarnerParameter(f64),
    #[error("matrix entry {name} = {value} must lie strictly between 0 and 1")]
    EntryOutOfRange { name: &'static str, value: f64 },
    #[error("matrix row {row} sums to {sum}, expected 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("privacy budget {0} must be finite and non-negative")]
    InvalidBudget(f64),
    #[error("a zero privacy budget forces both matrix rows to coincide, which destroys all signal")]
    DegenerateBudget,
    #[error("config names unknown attribute {0:?}")]
    UnknownAttribute(String),
}

/// A privacy budget ε in nats. Finite and non-negative by construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrivacyBudget(f64);

impl PrivacyBudget {
    pub const ZERO: PrivacyBudget = PrivacyBudget(0.0);

    pub fn new(nats: f64) -> Result<Self, MechanismError> {
        if !nats.is_finite() || nats < 0.0 {
            return Err(MechanismError::InvalidBudget(nats));
        }
        Ok(Self(nats))
    }

    pub fn nats(self) -> f64 {
        self.0
    }

    /// For budget arithmetic inside the crate whose result is already known
    /// to be finite and non-negative.
    pub(crate) fn from_nats_unchecked(nats: f64) -> Self {
        debug_assert!(nats.is_finite() && nats >= 0.0);
        Self(nats)
    }
}

impl TryFrom<f64> for PrivacyBudget {
    type Error = MechanismError;
    fn try_from(nats: f64) -> Result<Self, Self::Error> {
        Self::new(nats)
    }
}

impl From<PrivacyBudget> for f64 {
    fn from(b: PrivacyBudget) -> f64 {
        b.nats()
    }
}

/// The single parameter `p_w` of the classic symmetric mechanism: every bit
/// is kept with probability `p_w` and flipped otherwise.
///
/// Valid values lie strictly inside (0, 1) and away from 1/2: at exactly 1/2
/// the output is independent of the input, the budget collapses to 0, and no
/// statistic of the release carries information, so 1/2 is rejected rather
/// than accepted as a degenerate "perfectly private" setting.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct WarnerParameter(f64);

impl WarnerParameter {
    pub fn new(p: f64) -> Result<Self, MechanismError> {
        if !p.is_finite() || p <= 0.0 || p >= 1.0 || p == 0.5 {
            return Err(MechanismError::InvalidWarnerParameter(p));
        }
        Ok(Self(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The exact budget of the symmetric mechanism:
    /// `ε = max(ln((1-p)/p), ln(p/(1-p))) = |ln(p/(1-p))|`.
    ///
    /// Symmetric under `p ↦ 1-p`: keeping a bit with probability 0.1 reveals
    /// as much as keeping it with probability 0.9.
    pub fn epsilon(self) -> PrivacyBudget {
        PrivacyBudget::from_nats_unchecked((self.0 / (1.0 - self.0)).ln().abs())
    }

    /// The symmetric design matrix `[[p, 1-p], [1-p, p]]`.
    pub fn matrix(self) -> DesignMatrix {
        let p = self.0;
        DesignMatrix {
            p00: p,
            p01: 1.0 - p,
            p10: 1.0 - p,
            p11: p,
        }
    }
}

/// Row-stochastic 2×2 transition matrix with entries strictly inside (0, 1).
///
/// `p00`/`p01` are the probabilities of releasing 0/1 for a true 0;
/// `p10`/`p11` the same for a true 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DesignMatrix {
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
}

/// Wire form of [`DesignMatrix`]; deserialization funnels through
/// [`DesignMatrix::new`] so invalid matrices cannot enter through JSON.
#[derive(Debug, Serialize, Deserialize)]
struct RawMatrix {
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
}

impl TryFrom<RawMatrix> for DesignMatrix {
    type Error = MechanismError;
    fn try_from(m: RawMatrix) -> Result<Self, Self::Error> {
        DesignMatrix::new(m.p00, m.p01, m.p10, m.p11)
    }
}

impl From<DesignMatrix> for RawMatrix {
    fn from(m: DesignMatrix) -> RawMatrix {
        RawMatrix {
            p00: m.p00,
            p01: m.p01,
            p10: m.p10,
            p11: m.p11,
        }
    }
}

impl DesignMatrix {
    /// Validates entry ranges and row sums (to within [`ROW_SUM_TOLERANCE`]).
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self, MechanismError> {
        for (name, value) in [("p00", p00), ("p01", p01), ("p10", p10), ("p11", p11)] {
            // `value > 0.0 && value < 1.0` is false for NaN, so NaN is caught here too.
            if !(value > 0.0 && value < 1.0) {
                return Err(MechanismError::EntryOutOfRange { name, value });
            }
        }
        for (row, sum) in [(0, p00 + p01), (1, p10 + p11)] {
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(MechanismError::RowNotStochastic { row, sum });
            }
        }
        Ok(Self { p00, p01, p10, p11 })
    }

    /// The matrix that minimizes flips among all matrices meeting `budget`:
    /// diagonal `e^ε / (e^ε + 1)`, off-diagonal `1 / (e^ε + 1)`.
    ///
    /// Any other matrix satisfying ε keeps each bit with probability at most
    /// this diagonal, so this choice is utility-optimal at fixed budget. A
    /// zero budget is rejected: it would force `p00 = p01 = 1/2`.
    pub fn optimal_for(budget: PrivacyBudget) -> Result<Self, MechanismError> {
        if budget.nats() == 0.0 {
            return Err(MechanismError::DegenerateBudget);
        }
        let e = budget.nats().exp();
        let diag = e / (e + 1.0);
        // Derive the off-diagonal as the complement so rows sum to 1 exactly.
        let off = 1.0 - diag;
        Ok(Self {
            p00: diag,
            p01: off,
            p10: off,
            p11: diag,
        })
    }

    pub fn p00(&self) -> f64 {
        self.p00
    }
    pub fn p01(&self) -> f64 {
        self.p01
    }
    pub fn p10(&self) -> f64 {
        self.p10
    }
    pub fn p11(&self) -> f64 {
        self.p11
    }

    /// Probability that a bit survives perturbation unchanged, averaged for a
    /// uniform input; for symmetric matrices this is just the diagonal.
    pub fn diagonal_mean(&self) -> f64 {
        0.5 * (self.p00 + self.p11)
    }

    /// The smallest budget this matrix satisfies.
    pub fn epsilon(&self) -> PrivacyBudget {
        // Entries are strictly inside (0,1), so the ratio logs are finite.
        PrivacyBudget::from_nats_unchecked(tightest_epsilon(
            self.p00, self.p01, self.p10, self.p11,
        ))
    }

    /// Whether the matrix satisfies `budget`, i.e. all four output
    /// likelihood ratios are bounded by `e^ε` (with [`BUDGET_CHECK_SLACK`]
    /// of multiplicative slack).
    pub fn satisfies(&self, budget: PrivacyBudget) -> bool {
        let bound = budget.nats().exp() * (1.0 + BUDGET_CHECK_SLACK);
        self.p00 <= bound * self.p10
            && self.p10 <= bound * self.p00
            && self.p11 <= bound * self.p01
            && self.p01 <= bound * self.p11
    }
}

/// Worst-case log-likelihood ratio `max(|ln(p00/p10)|, |ln(p11/p01)|)` —
/// the smallest ε for which every output is at most `e^ε` times likelier
/// under one input than the other. Returns `+∞` if any entry is zero (some
/// output then betrays its input with certainty), which makes this form
/// directly reusable for empirically estimated matrices.
pub fn tightest_epsilon(p00: f64, p01: f64, p10: f64, p11: f64) -> f64 {
    if p00 <= 0.0 || p01 <= 0.0 || p10 <= 0.0 || p11 <= 0.0 {
        return f64::INFINITY;
    }
    let zero_side = (p00 / p10).ln().abs();
    let one_side = (p11 / p01).ln().abs();
    zero_side.max(one_side)
}

/// Perturbs one bit by thresholding a uniform draw from [0, 1):
/// a true 0 stays 0 iff `draw < p00`, a true 1 stays 1 iff `draw < p11`.
pub fn perturb_value(x: u8, matrix: &DesignMatrix, draw: f64) -> u8 {
    debug_assert!(x <= 1, "input bit must be 0 or 1");
    debug_assert!((0.0..1.0).contains(&draw), "draw must lie in [0, 1)");
    if x == 0 {
        u8::from(draw >= matrix.p00)
    } else {
        u8::from(draw < matrix.p11)
    }
}

/// Deterministic uniform draws keyed by `(master seed, record, attribute)`.
///
/// Implemented as random access into a ChaCha8 keystream: the master seed is
/// expanded to the cipher key (the standard SplitMix64 expansion behind
/// `seed_from_u64`), the record index selects the stream, and the draw reads
/// the 64-bit word at position `2 × attribute_index` of that stream. The top
/// 53 bits of the word are scaled onto the unit interval, so each draw is
/// uniform on [0, 1) with full double precision.
///
/// Because every cell addresses its own keystream word, draws do not depend
/// on evaluation order, on which other attributes are configured, or on the
/// platform — a release is a pure function of `(database, config, seed)`.
pub struct DrawSource {
    rng: ChaCha8Rng,
}

impl DrawSource {
    pub fn new(master_seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(master_seed),
        }
    }

    /// The uniform draw for one cell.
    pub fn draw(&mut self, record_index: u64, attribute_index: u64) -> f64 {
        self.rng.set_stream(record_index);
        self.rng.set_word_pos(u128::from(attribute_index) * 2);
        let word = self.rng.next_u64();
        // 53-bit mantissa: (word >> 11) ∈ [0, 2^53), scaled by 2^-53.
        (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// One-off form of [`DrawSource::draw`] for spot checks.
pub fn uniform_draw(master_seed: u64, record_index: u64, attribute_index: u64) -> f64 {
    DrawSource::new(master_seed).draw(record_index, attribute_index)
}

/// Which attributes to perturb, with what matrices, under which master seed.
///
/// Serializes to `{"master_seed": <u64>, "attributes": {name: {...}}}` where
/// each matrix is given either explicitly (`p00..p11`) or through one of two
/// shorthands: `{"warner_pw": p}` for the symmetric matrix or
/// `{"epsilon": e}` for the utility-optimal matrix at that budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationConfig {
    pub master_seed: u64,
    /// Attribute name → matrix, ordered by name so serialization is stable.
    pub attributes: BTreeMap<String, DesignMatrix>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(
        "attribute {attribute:?}: give exactly one of \"warner_pw\", \"epsilon\", \
         or all four entries p00, p01, p10, p11"
    )]
    MatrixShape { attribute: String },
    #[error("attribute {attribute:?}: {source}")]
    Matrix {
        attribute: String,
        source: MechanismError,
    },
    #[error("no master seed: the config omits \"master_seed\" and no override was given")]
    MissingSeed,
}

/// Wire form of one attribute's matrix spec: exactly one of the three
/// spellings must be used.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixSpec {
    #[serde(default)]
    warner_pw: Option<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    p00: Option<f64>,
    #[serde(default)]
    p01: Option<f64>,
    #[serde(default)]
    p10: Option<f64>,
    #[serde(default)]
    p11: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default)]
    master_seed: Option<u64>,
    attributes: BTreeMap<String, MatrixSpec>,
}

impl MatrixSpec {
    fn resolve(self, attribute: &str) -> Result<DesignMatrix, ConfigError> {
        let explicit = [self.p00, self.p01, self.p10, self.p11];
        let shape = (
            self.warner_pw,
            self.epsilon,
            explicit.iter().filter(|e| e.is_some()).count(),
        );
        let built = match shape {
            (Some(pw), None, 0) => WarnerParameter::new(pw).map(WarnerParameter::matrix),
            (None, Some(eps), 0) => {
                PrivacyBudget::new(eps).and_then(DesignMatrix::optimal_for)
            }
            (None, None, 4) => DesignMatrix::new(
                self.p00.unwrap(),
                self.p01.unwrap(),
                self.p10.unwrap(),
                self.p11.unwrap(),
            ),
            _ => {
                return Err(ConfigError::MatrixShape {
                    attribute: attribute.to_string(),
                })
            }
        };
        built.map_err(|source| ConfigError::Matrix {
            attribute: attribute.to_string(),
            source,
        })
    }
}

impl PerturbationConfig {
    /// Config perturbing a single attribute; convenient in tests and examples.
    pub fn single(master_seed: u64, attribute: &str, matrix: DesignMatrix) -> Self {
        Self {
            master_seed,
            attributes: BTreeMap::from([(attribute.to_string(), matrix)]),
        }
    }

    /// Parses the JSON config format. The document must carry `master_seed`.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Self::from_json_with_seed(text, None)
    }

    /// Parses the JSON config format, with `seed_override` taking precedence
    /// over any `master_seed` in the document. One of the two must be present.
    pub fn from_json_with_seed(
        text: &str,
        seed_override: Option<u64>,
    ) -> Result<Self, ConfigError> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        let master_seed = seed_override
            .or(doc.master_seed)
            .ok_or(ConfigError::MissingSeed)?;
        let mut attributes = BTreeMap::new();
        for (name, spec) in doc.attributes {
            let matrix = spec.resolve(&name)?;
            attributes.insert(name, matrix);
        }
        Ok(Self {
            master_seed,
            attributes,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Errors if the config names an attribute the schema lacks.
    pub fn validate_against(&self, schema: &AttributeSchema) -> Result<(), MechanismError> {
        for name in self.attributes.keys() {
            if !schema.contains(name) {
                return Err(MechanismError::UnknownAttribute(name.clone()));
            }
        }
        Ok(())
    }
}

/// Applies the config to every record of `db`, each configured cell getting
/// its own keyed draw. Unconfigured attributes pass through untouched.
pub fn perturb_database(
    db: &AttributeDatabase,
    config: &PerturbationConfig,
) -> Result<AttributeDatabase, MechanismError> {
    let mut targets: Vec<(usize, &DesignMatrix)> = Vec::with_capacity(config.attributes.len());
    for (name, matrix) in &config.attributes {
        let idx = db
            .schema()
            .index_of(name)
            .ok_or_else(|| MechanismError::UnknownAttribute(name.clone()))?;
        targets.push((idx, matrix));
    }
    targets.sort_by_key(|&(idx, _)| idx);

    let mut source = DrawSource::new(config.master_seed);
    let records = db
        .records()
        .iter()
        .enumerate()
        .map(|(row, record)| {
            let mut bits = record.bits().to_vec();
            for &(attr, matrix) in &targets {
                let draw = source.draw(row as u64, attr as u64);
                bits[attr] = perturb_value(bits[attr], matrix, draw);
            }
            AttributeRecord::from_parts_unchecked(record.id().to_string(), bits)
        })
        .collect();
    Ok(AttributeDatabase::from_parts_unchecked(
        db.schema().clone(),
        records,
    ))
}
