//! One function per subcommand. Each takes plain values, reads and writes
//! files, and returns the data it computed so tests can assert on it.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::SecondsFormat;

use randresp::accounting::BudgetLedger;
use randresp::audit::{audit, AuditReport, Verdict};
use randresp::db::AttributeDatabase;
use randresp::estimation::{utility_report, utility_report_csv, UtilityRow};
use randresp::manifest::SynthesisManifest;
use randresp::mechanism::{perturb_database, PerturbationConfig};

use crate::sweep::{run_sweep, SweepTable};
use crate::{Cli, Command, InputFormat};

/// Dispatches a parsed command line. The returned exit code is only ever
/// non-zero for audit verdicts; all errors travel as `Err`.
pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest { input, format, out } => {
            cmd_ingest(&input, format, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Perturb {
            db,
            config,
            seed,
            out_dir,
            created_at,
        } => {
            cmd_perturb(&db, &config, seed, &out_dir, &created_at)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate {
            original,
            perturbed,
            config,
            out,
        } => {
            cmd_estimate(&original, &perturbed, &config, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit {
            original,
            perturbed,
            config,
            slack,
            out,
        } => {
            let report = cmd_audit(&original, &perturbed, &config, slack, out.as_deref())?;
            Ok(match report.overall {
                Verdict::Pass => ExitCode::SUCCESS,
                Verdict::Fail => ExitCode::from(2),
                Verdict::Inconclusive => ExitCode::from(3),
            })
        }
        Command::Sweep {
            db,
            attributes,
            pw,
            trials,
            seed,
            out,
        } => {
            cmd_sweep(&db, attributes.as_deref(), &pw, trials, seed, &out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_db(path: &Path) -> Result<AttributeDatabase> {
    AttributeDatabase::parse_csv(&read_file(path)?)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Loads a config for commands that never draw randomness. A seed is not
/// required there, so a missing one is filled with zero.
fn load_config_for_analysis(path: &Path) -> Result<PerturbationConfig> {
    let text = read_file(path)?;
    PerturbationConfig::from_json_with_seed(&text, None)
        .or_else(|_| PerturbationConfig::from_json_with_seed(&text, Some(0)))
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn cmd_ingest(input: &Path, format: InputFormat, out: &Path) -> Result<AttributeDatabase> {
    let text = read_file(input)?;
    let db = match format {
        InputFormat::Celeba => AttributeDatabase::parse_celeba(&text),
        InputFormat::Csv => AttributeDatabase::parse_csv(&text),
    }
    .with_context(|| format!("parsing {}", input.display()))?;

    println!("records: {}", db.len());
    println!("attributes: {}", db.schema().arity());
    if !db.is_empty() {
        for name in db.schema().names() {
            let freq = db.frequency(name).expect("attribute from own schema");
            println!("frequency {name}: {freq:.4}");
        }
    }
    write_file(out, &db.to_csv()?)?;
    println!("wrote {}", out.display());
    Ok(db)
}

pub fn cmd_perturb(
    db_path: &Path,
    config_path: &Path,
    seed: Option<u64>,
    out_dir: &Path,
    created_at: &str,
) -> Result<()> {
    let db = load_db(db_path)?;
    let config = PerturbationConfig::from_json_with_seed(&read_file(config_path)?, seed)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    // Validate everything before touching the output directory, so a bad
    // invocation leaves no partial release behind.
    config
        .validate_against(db.schema())
        .context("config does not match the database schema")?;
    let created_at = resolve_created_at(created_at)?;

    let perturbed = perturb_database(&db, &config)?;
    let ledger = BudgetLedger::from_config(&config);
    let manifest = SynthesisManifest::emit(&perturbed, &ledger, &created_at);

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    write_file(&out_dir.join("perturbed.csv"), &perturbed.to_csv()?)?;
    write_file(&out_dir.join("ledger.json"), &(ledger.to_json() + "\n"))?;
    write_file(&out_dir.join("manifest.jsonl"), &manifest.to_jsonl())?;

    println!(
        "perturbed {} records, {} attributes, total epsilon {}",
        perturbed.len(),
        config.attributes.len(),
        ledger.total_epsilon.nats()
    );
    println!("wrote {}", out_dir.join("perturbed.csv").display());
    println!("wrote {}", out_dir.join("ledger.json").display());
    println!("wrote {}", out_dir.join("manifest.jsonl").display());
    Ok(())
}

/// The manifest timestamp: a caller-pinned RFC 3339 instant, or "now".
fn resolve_created_at(raw: &str) -> Result<String> {
    if raw == "now" {
        return Ok(chrono::Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));
    }
    chrono::DateTime::parse_from_rfc3339(raw)
        .with_context(|| format!("--created-at {raw:?} is not RFC 3339 or \"now\""))?;
    Ok(raw.to_string())
}

pub fn cmd_estimate(
    original: &Path,
    perturbed: &Path,
    config: &Path,
    out: Option<&Path>,
) -> Result<Vec<UtilityRow>> {
    let orig_db = load_db(original)?;
    let pert_db = load_db(perturbed)?;
    let config = load_config_for_analysis(config)?;
    let rows = utility_report(&orig_db, &pert_db, &config)?;
    let csv = utility_report_csv(&rows);
    match out {
        Some(path) => {
            write_file(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(rows)
}

pub fn cmd_audit(
    original: &Path,
    perturbed: &Path,
    config: &Path,
    slack: f64,
    out: Option<&Path>,
) -> Result<AuditReport> {
    let orig_db = load_db(original)?;
    let pert_db = load_db(perturbed)?;
    let config = load_config_for_analysis(config)?;
    let report = audit(&orig_db, &pert_db, &config, slack)?;
    let json = report.to_json() + "\n";
    match out {
        Some(path) => {
            write_file(path, &json)?;
            println!("wrote {}", path.display());
        }
        None => print!("{json}"),
    }
    let overall = match report.overall {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    };
    eprintln!("audit: {overall}");
    Ok(report)
}

/// Attributes swept when `--attributes` is not given, filtered to the schema.
pub const DEFAULT_SWEEP_ATTRIBUTES: [&str; 5] =
    ["Bangs", "Blond_Hair", "Male", "Pale_Skin", "Young"];

pub fn cmd_sweep(
    db_path: &Path,
    attributes: Option<&[String]>,
    pw: &[f64],
    trials: u32,
    seed: u64,
    out: &Path,
) -> Result<SweepTable> {
    let db = load_db(db_path)?;
    let names: Vec<String> = match attributes {
        Some(list) => {
            for name in list {
                if !db.schema().contains(name) {
                    bail!("unknown attribute {name:?}");
                }
            }
            list.to_vec()
        }
        None => DEFAULT_SWEEP_ATTRIBUTES
            .iter()
            .filter(|n| db.schema().contains(n))
            .map(|n| n.to_string())
            .collect(),
    };
    if names.is_empty() {
        bail!(
            "no attributes to sweep: pass --attributes or use a database with \
             any of {}",
            DEFAULT_SWEEP_ATTRIBUTES.join(", ")
        );
    }
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    let table = run_sweep(&db, &names, pw, trials, seed)?;
    write_file(out, &table.to_csv())?;
    println!("wrote {}", out.display());
    Ok(table)
}
