//! Command implementations behind the `randresp` binary.
//!
//! Everything lives in the library so integration tests can drive commands
//! in-process; `main.rs` only parses arguments and maps outcomes to exit
//! codes (0 success / audit pass, 1 usage or data error, 2 audit fail,
//! 3 audit inconclusive).

pub mod commands;
pub mod sweep;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "randresp",
    version,
    about = "Randomized-response privacy for binary attribute databases",
    after_help = "Exit codes: 0 success/pass, 1 usage or data error, 2 audit fail, 3 audit inconclusive."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// CelebA annotation layout: count line, name line, then `id ±1 …` rows.
    Celeba,
    /// The tool's own CSV dialect.
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an annotation file, print a summary, and write the normalized CSV.
    Ingest {
        /// Input annotation file.
        input: PathBuf,
        /// Layout of the input file.
        #[arg(long, value_enum)]
        format: InputFormat,
        /// Where to write the normalized CSV database.
        #[arg(long)]
        out: PathBuf,
    },
    /// Perturb a database; write perturbed CSV, budget ledger, and manifest.
    Perturb {
        /// CSV database to perturb (as written by `ingest`).
        db: PathBuf,
        /// JSON perturbation config.
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for perturbed.csv, ledger.json, manifest.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
        /// RFC 3339 timestamp for the manifest header, or "now". The default
        /// is a fixed epoch so identical inputs give identical bytes.
        #[arg(long, default_value = "1970-01-01T00:00:00Z")]
        created_at: String,
    },
    /// Debias frequencies of a release and report per-attribute utility.
    Estimate {
        /// Original CSV database.
        #[arg(long)]
        original: PathBuf,
        /// Perturbed CSV database.
        #[arg(long)]
        perturbed: PathBuf,
        /// JSON perturbation config used for the release.
        #[arg(long)]
        config: PathBuf,
        /// Write the utility report CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the realized privacy of a release against its config.
    Audit {
        /// Original CSV database.
        #[arg(long)]
        original: PathBuf,
        /// Perturbed CSV database.
        #[arg(long)]
        perturbed: PathBuf,
        /// JSON perturbation config used for the release.
        #[arg(long)]
        config: PathBuf,
        /// Additive tolerance on the realized budget.
        #[arg(long, default_value_t = 0.15)]
        slack: f64,
        /// Write the audit report JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the symmetric mechanism across keep probabilities and tabulate
    /// keep-rate and estimation error per attribute.
    Sweep {
        /// CSV database to sweep over.
        db: PathBuf,
        /// Comma-separated attribute names. Defaults to the well-known
        /// face-attribute set (Bangs, Blond_Hair, Male, Pale_Skin, Young)
        /// filtered to the schema.
        #[arg(long, value_delimiter = ',')]
        attributes: Option<Vec<String>>,
        /// Comma-separated keep probabilities to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.6, 0.7, 0.8, 0.9])]
        pw: Vec<f64>,
        /// Trials to average per keep probability.
        #[arg(long, default_value_t = 10)]
        trials: u32,
        /// Base seed; trial t of every sweep point uses seed + t.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the sweep table CSV.
        #[arg(long)]
        out: PathBuf,
    },
}
