//! Conditioning manifests for a downstream attribute-conditioned image
//! synthesizer.
//!
//! A manifest is JSON lines: a header object carrying the schema, the budget
//! ledger, the seed, and a creation timestamp, then one object per record
//! with the released bits in two encodings — `bits` (0/1, native here) and
//! `signed` (-1/1, the convention of common face-attribute training
//! pipelines). The mock consumer in [`mock_synthesize`] validates a manifest
//! the way a real trainer's data loader would, acknowledging each row and
//! diagnosing bad ones instead of silently training on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::BudgetLedger;
use crate::db::AttributeDatabase;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is empty; expected a header line")]
    MissingHeader,
    #[error("line {line}: not a valid manifest object: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: row has {found} bits, the header schema has {expected} attributes")]
    RowArity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: bit value {value} is not 0 or 1")]
    NonBinaryBit { line: usize, value: i64 },
    #[error("line {line}: the bits and signed encodings disagree")]
    EncodingMismatch { line: usize },
}

/// First line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    /// Attribute names, in the bit order used by every row.
    pub schema: Vec<String>,
    pub ledger: BudgetLedger,
    /// Master seed of the release (duplicated from the ledger for loaders
    /// that only read the top-level fields).
    pub seed: u64,
    /// RFC 3339 timestamp chosen by the caller; not read back by any
    /// computation, so deterministic pipelines can pin it.
    pub created_at: String,
}

/// One released record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub record_id: String,
    /// Released bits, 0/1, in schema order.
    pub bits: Vec<u8>,
    /// The same bits as -1/1.
    pub signed: Vec<i8>,
}

/// A parsed or freshly emitted manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisManifest {
    pub header: ManifestHeader,
    pub rows: Vec<ManifestRow>,
}

impl SynthesisManifest {
    /// Builds the manifest for a released database and its ledger.
    pub fn emit(db: &AttributeDatabase, ledger: &BudgetLedger, created_at: &str) -> Self {
        let rows = db
            .records()
            .iter()
            .map(|record| ManifestRow {
                record_id: record.id().to_string(),
                bits: record.bits().to_vec(),
                signed: record
                    .bits()
                    .iter()
                    .map(|&b| if b == 1 { 1 } else { -1 })
                    .collect(),
            })
            .collect();
        Self {
            header: ManifestHeader {
                schema: db.schema().names().to_vec(),
                ledger: ledger.clone(),
                seed: ledger.seed,
                created_at: created_at.to_string(),
            },
            rows,
        }
    }

    /// One JSON object per line, header first, every line newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    /// Strict parse of the JSON-lines format, validating row arity against
    /// the header schema, bit range, and agreement of the two encodings.
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut lines = text.lines().enumerate();
        let (_, header_line) = lines.next().ok_or(ManifestError::MissingHeader)?;
        let header: ManifestHeader = serde_json::from_str(header_line)
            .map_err(|source| ManifestError::Json { line: 1, source })?;
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let row: ManifestRow = serde_json::from_str(line)
                .map_err(|source| ManifestError::Json { line: lineno, source })?;
            if row.bits.len() != header.schema.len() {
                return Err(ManifestError::RowArity {
                    line: lineno,
                    expected: header.schema.len(),
                    found: row.bits.len(),
                });
            }
            for &bit in &row.bits {
                if bit > 1 {
                    return Err(ManifestError::NonBinaryBit {
                        line: lineno,
                        value: i64::from(bit),
                    });
                }
            }
            let consistent = row.signed.len() == row.bits.len()
                && row
                    .bits
                    .iter()
                    .zip(&row.signed)
                    .all(|(&b, &s)| s == if b == 1 { 1 } else { -1 });
            if !consistent {
                return Err(ManifestError::EncodingMismatch { line: lineno });
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

/// Acknowledgement for one manifest row, as a consumer would log it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowAck {
    /// 1-based manifest line.
    pub line: usize,
    pub record_id: Option<String>,
    /// Bits as received (unvalidated), echoed for traceability.
    pub bits: Option<Vec<i64>>,
    pub ok: bool,
    /// Present iff `ok` is false.
    pub diagnostic: Option<String>,
}

/// Summary from the mock consumer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsumerReport {
    pub rows_ok: u64,
    pub rows_failed: u64,
    pub acks: Vec<RowAck>,
}

/// Loosely typed row used by the mock consumer so that malformed rows can be
/// diagnosed individually instead of aborting the run.
#[derive(Debug, Deserialize)]
struct LooseRow {
    record_id: Option<String>,
    bits: Option<Vec<i64>>,
    signed: Option<Vec<i64>>,
}

/// Stands in for the downstream synthesizer's data loader: checks the header,
/// then walks every row, emitting one acknowledgement each. A row fails (and
/// is counted, not fatal) if it is not valid JSON, lacks a field, has the
/// wrong arity, a non-binary bit, or disagreeing encodings.
pub fn mock_synthesize(manifest_text: &str) -> Result<ConsumerReport, ManifestError> {
    let mut lines = manifest_text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or(ManifestError::MissingHeader)?;
    let header: ManifestHeader = serde_json::from_str(header_line)
        .map_err(|source| ManifestError::Json { line: 1, source })?;
    let arity = header.schema.len();

    let mut report = ConsumerReport {
        rows_ok: 0,
        rows_failed: 0,
        acks: Vec::new(),
    };
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (record_id, bits, diagnostic) = match serde_json::from_str::<LooseRow>(line) {
            Err(e) => (None, None, Some(format!("unparseable row: {e}"))),
            Ok(row) => {
                let diagnostic = check_loose_row(&row, arity);
                (row.record_id, row.bits, diagnostic)
            }
        };
        let ok = diagnostic.is_none();
        if ok {
            report.rows_ok += 1;
        } else {
            report.rows_failed += 1;
        }
        report.acks.push(RowAck {
            line: lineno,
            record_id,
            bits,
            ok,
            diagnostic,
        });
    }
    Ok(report)
}

fn check_loose_row(row: &LooseRow, arity: usize) -> Option<String> {
    if row.record_id.is_none() {
        return Some("missing record_id".to_string());
    }
    let Some(bits) = &row.bits else {
        return Some("missing bits".to_string());
    };
    if bits.len() != arity {
        return Some(format!(
            "expected {arity} bits per the header schema, found {}",
            bits.len()
        ));
    }
    if let Some(&bad) = bits.iter().find(|&&b| b != 0 && b != 1) {
        return Some(format!("bit value {bad} is not 0 or 1"));
    }
    match &row.signed {
        None => Some("missing signed encoding".to_string()),
        Some(signed) => {
            let consistent = signed.len() == bits.len()
                && bits
                    .iter()
                    .zip(signed)
                    .all(|(&b, &s)| s == if b == 1 { 1 } else { -1 });
            if consistent {
                None
            } else {
                Some("bits and signed encodings disagree".to_string())
            }
        }
    }
}
