//! Provable ε-differential privacy for binary face-attribute databases via
//! randomized response.
//!
//! The crate covers the full release pipeline:
//!
//! 1. [`db`] — ingest annotation files (CelebA attribute lists or a plain CSV
//!    dialect) into an [`AttributeDatabase`], and write databases back out.
//! 2. [`mechanism`] — perturb each cell independently with a 2×2 row-stochastic
//!    [`DesignMatrix`], driven by deterministic seeded draws, so a release is
//!    exactly reproducible from `(database, config, seed)`.
//! 3. [`accounting`] — compute per-attribute privacy budgets and their
//!    sequential-composition total in a [`BudgetLedger`].
//! 4. [`estimation`] — invert the known response probabilities to recover
//!    unbiased frequency estimates (with variance and confidence intervals)
//!    from the perturbed release.
//! 5. [`audit`] — re-estimate the transition matrix empirically from an
//!    (original, perturbed) pair and check the realized ε against the target.
//! 6. [`manifest`] — emit a conditioning manifest (JSON lines) for a
//!    downstream attribute-conditioned image synthesizer, plus a mock consumer
//!    that validates manifests the way a real trainer would.
//!
//! Budgets are expressed in nats throughout: a mechanism with budget ε
//! guarantees `Pr[M(x) = y] ≤ e^ε · Pr[M(x') = y]` for any pair of inputs
//! `x, x'` and any output `y`.
//!
//! ```
//! use randresp::db::AttributeDatabase;
//! use randresp::mechanism::{PerturbationConfig, WarnerParameter, perturb_database};
//! use randresp::estimation::debias_frequency;
//!
//! let db = AttributeDatabase::parse_csv("record_id,Smiling\na,1\nb,0\nc,1\n").unwrap();
//! let pw = WarnerParameter::new(0.9).unwrap();
//! let config = PerturbationConfig::single(7, "Smiling", pw.matrix());
//! let released = perturb_database(&db, &config).unwrap();
//!
//! // The release is deterministic in the seed...
//! assert_eq!(released, perturb_database(&db, &config).unwrap());
//! // ...and its observed frequency debiases to an estimate of the original.
//! let lambda = released.frequency("Smiling").unwrap();
//! let estimate = debias_frequency(lambda, &pw.matrix(), 3).unwrap();
//! assert!(estimate.raw_point.is_finite());
//! ```

pub mod accounting;
pub mod audit;
pub mod db;
pub mod estimation;
pub mod manifest;
pub mod mechanism;

pub use accounting::BudgetLedger;
pub use audit::{AuditReport, Verdict};
pub use db::{AttributeDatabase, AttributeRecord, AttributeSchema};
pub use estimation::FrequencyEstimate;
pub use manifest::SynthesisManifest;
pub use mechanism::{DesignMatrix, PerturbationConfig, PrivacyBudget, WarnerParameter};
