//! Privacy budget accounting for multi-attribute releases.
//!
//! Each attribute is perturbed by its own independent mechanism, so the
//! release as a whole is covered by the sequential-composition upper bound:
//! the sum of the per-attribute budgets. The ledger records the seed, every
//! per-attribute ε, and that total, and travels with the release so an
//! auditor can check the claim against the data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mechanism::{PerturbationConfig, PrivacyBudget};

/// Sums budgets under sequential composition.
///
/// The values are sorted before summing, so the result is bit-identical for
/// any ordering of the same multiset — ledgers never disagree because two
/// tools iterated a map differently.
pub fn compose_sequential<I>(budgets: I) -> PrivacyBudget
where
    I: IntoIterator<Item = PrivacyBudget>,
{
    let mut nats: Vec<f64> = budgets.into_iter().map(PrivacyBudget::nats).collect();
    nats.sort_by(f64::total_cmp);
    PrivacyBudget::new(nats.iter().sum())
        .expect("sum of finite non-negative budgets is a valid budget")
}

/// The accounting record for one release: seed, per-attribute budgets, and
/// their sequential-composition total.
///
/// Serializes as `{"seed": …, "per_attribute": {…}, "total_epsilon": …}`
/// with attributes ordered by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub seed: u64,
    pub per_attribute: BTreeMap<String, PrivacyBudget>,
    pub total_epsilon: PrivacyBudget,
}

impl BudgetLedger {
    /// Derives the ledger for a config: one ε per configured attribute, the
    /// total by [`compose_sequential`].
    pub fn from_config(config: &PerturbationConfig) -> Self {
        let per_attribute: BTreeMap<String, PrivacyBudget> = config
            .attributes
            .iter()
            .map(|(name, matrix)| (name.clone(), matrix.epsilon()))
            .collect();
        let total_epsilon = compose_sequential(per_attribute.values().copied());
        Self {
            seed: config.master_seed,
            per_attribute,
            total_epsilon,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{DesignMatrix, WarnerParameter};

    fn budget(nats: f64) -> PrivacyBudget {
        PrivacyBudget::new(nats).unwrap()
    }

    #[test]
    fn compose_sums_and_handles_empty() {
        assert_eq!(compose_sequential([]).nats(), 0.0);
        assert_eq!(compose_sequential([budget(0.75)]).nats(), 0.75);
        let total = compose_sequential([budget(0.5), budget(1.25)]);
        assert_eq!(total.nats(), 1.75);
        // Budgets are logs, so they compose like products: ln 2 + ln 3 = ln 6.
        let ln6 = compose_sequential([budget(2.0_f64.ln()), budget(3.0_f64.ln())]);
        assert!((ln6.nats() - 6.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn compose_two_warner_08_attributes_gives_2ln4() {
        let eps = WarnerParameter::new(0.8).unwrap().epsilon();
        let total = compose_sequential([eps, eps]);
        assert!((total.nats() - 2.0 * 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn compose_is_order_invariant_bit_for_bit() {
        let vals = [0.1, 0.7, 1e-9, 3.0, 0.30000000000000004];
        let forward = compose_sequential(vals.iter().map(|&v| budget(v)));
        let backward = compose_sequential(vals.iter().rev().map(|&v| budget(v)));
        let rotated = compose_sequential(
            vals.iter().cycle().skip(2).take(vals.len()).map(|&v| budget(v)),
        );
        assert_eq!(forward.nats(), backward.nats());
        assert_eq!(forward.nats(), rotated.nats());
    }

    #[test]
    fn ledger_from_config_totals_per_attribute_budgets() {
        let mut config = PerturbationConfig::single(
            11,
            "Bangs",
            WarnerParameter::new(0.8).unwrap().matrix(),
        );
        config.attributes.insert(
            "Young".to_string(),
            DesignMatrix::optimal_for(budget(2.0_f64.ln())).unwrap(),
        );
        let ledger = BudgetLedger::from_config(&config);
        assert_eq!(ledger.seed, 11);
        assert!((ledger.per_attribute["Bangs"].nats() - 4.0_f64.ln()).abs() < 1e-12);
        assert!((ledger.per_attribute["Young"].nats() - 2.0_f64.ln()).abs() < 1e-12);
        let expected = ledger.per_attribute["Bangs"].nats() + ledger.per_attribute["Young"].nats();
        assert!((ledger.total_epsilon.nats() - expected).abs() < 1e-15);

        // Adding an attribute never decreases the total.
        let before = ledger.total_epsilon;
        config.attributes.insert(
            "Male".to_string(),
            WarnerParameter::new(0.6).unwrap().matrix(),
        );
        let after = BudgetLedger::from_config(&config).total_epsilon;
        assert!(after.nats() >= before.nats());
    }

    #[test]
    fn ledger_json_round_trip_and_key_order() {
        let mut config = PerturbationConfig::single(
            5,
            "Zeta",
            WarnerParameter::new(0.7).unwrap().matrix(),
        );
        config.attributes.insert(
            "Alpha".to_string(),
            WarnerParameter::new(0.9).unwrap().matrix(),
        );
        let ledger = BudgetLedger::from_config(&config);
        let json = ledger.to_json();
        assert!(json.find("\"Alpha\"").unwrap() < json.find("\"Zeta\"").unwrap());
        assert!(json.find("\"seed\"").unwrap() < json.find("\"per_attribute\"").unwrap());
        assert_eq!(BudgetLedger::from_json(&json).unwrap(), ledger);
        // A negative budget cannot enter through deserialization.
        let bad = r#"{"seed":1,"per_attribute":{"A":-0.5},"total_epsilon":0.5}"#;
        assert!(BudgetLedger::from_json(bad).is_err());
    }
}
