//! Privacy–utility sweep for the symmetric mechanism.
//!
//! For each keep probability the database is perturbed `trials` times (trial
//! t uses master seed `base_seed + t`), and the per-attribute keep-rate and
//! absolute debiasing error are averaged over trials. The same trial seeds
//! are reused at every sweep point — paired draws, so that differences
//! between rows reflect the mechanism, not resampling noise. With the
//! threshold sampler this makes the keep-rate column exactly monotone in the
//! keep probability: raising the diagonal can only turn flips into keeps,
//! never the reverse.

use anyhow::Result;

use randresp::db::AttributeDatabase;
use randresp::estimation::{debias_frequency, flip_rate};
use randresp::mechanism::{perturb_database, PerturbationConfig, WarnerParameter};

/// One sweep point: a keep probability, its budget, and per-attribute means
/// (parallel to [`SweepTable::attributes`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pw: f64,
    /// Budget of the symmetric mechanism at `pw`; `|ln(pw/(1-pw))|`.
    pub epsilon: f64,
    pub keep_rate: Vec<f64>,
    pub estimation_error: Vec<f64>,
}

/// Sweep results across keep probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub attributes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV with one row per keep probability:
    /// `pw,epsilon,keep_rate_<attr>…,estimation_error_<attr>…`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pw,epsilon");
        for name in &self.attributes {
            out.push_str(&format!(",keep_rate_{name}"));
        }
        for name in &self.attributes {
            out.push_str(&format!(",estimation_error_{name}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.pw, row.epsilon));
            for v in row.keep_rate.iter().chain(&row.estimation_error) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the sweep. `names` must exist in the schema and `pw` values must be
/// valid keep probabilities; both are rejected up front.
pub fn run_sweep(
    db: &AttributeDatabase,
    names: &[String],
    pw: &[f64],
    trials: u32,
    base_seed: u64,
) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(pw.len());
    for &p in pw {
        let parameter = WarnerParameter::new(p)?;
        let matrix = parameter.matrix();
        let mut keep_sum = vec![0.0; names.len()];
        let mut err_sum = vec![0.0; names.len()];
        for trial in 0..trials {
            let mut config = PerturbationConfig {
                master_seed: base_seed.wrapping_add(u64::from(trial)),
                attributes: Default::default(),
            };
            for name in names {
                config.attributes.insert(name.clone(), matrix);
            }
            let perturbed = perturb_database(db, &config)?;
            for (i, name) in names.iter().enumerate() {
                keep_sum[i] += 1.0 - flip_rate(db, &perturbed, name)?;
                let estimate =
                    debias_frequency(perturbed.frequency(name)?, &matrix, perturbed.len() as u64)?;
                err_sum[i] += (estimate.raw_point - db.frequency(name)?).abs();
            }
        }
        let t = f64::from(trials);
        rows.push(SweepRow {
            pw: p,
            epsilon: parameter.epsilon().nats(),
            keep_rate: keep_sum.iter().map(|s| s / t).collect(),
            estimation_error: err_sum.iter().map(|s| s / t).collect(),
        });
    }
    Ok(SweepTable {
        attributes: names.to_vec(),
        rows,
    })
}
