//! Binary attribute databases and their on-disk formats.
//!
//! A database is an ordered list of records, each carrying a string id and one
//! bit per schema attribute. Two input formats are supported: the CelebA
//! annotation layout (count line, name line, then `id ±1 ±1 …` rows) and a
//! strict CSV dialect (comma-separated, no quoting, header starting with
//! `record_id`, every row newline-terminated). CSV is also the output format,
//! so `parse_csv(to_csv(db)) == db` holds for any writable database.

use std::collections::HashSet;

use thiserror::Error;

/// Errors from parsing, constructing, or writing attribute databases.
///
/// Parser variants carry 1-based line numbers so CLI diagnostics can point at
/// the offending input line.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DbError {
    #[error("line 1: expected a record count, found {0:?}")]
    InvalidCountLine(String),
    #[error("line 2: attribute name line is missing or empty")]
    EmptyNameLine,
    #[error("attribute name is empty")]
    EmptyAttributeName,
    #[error("duplicate attribute name {0:?}")]
    DuplicateAttribute(String),
    #[error("schema declares no attributes")]
    EmptySchema,
    #[error("line {line}: expected {expected} attribute tokens after the id, found {found}")]
    RowArity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: token {token:?} is not \"-1\" or \"1\"")]
    BadToken { line: usize, token: String },
    #[error("line {line}: duplicate record id {id:?}")]
    DuplicateRecordId { line: usize, id: String },
    #[error("header declares {declared} records but {actual} data rows follow")]
    CountMismatch { declared: usize, actual: usize },
    #[error("line 1: header must start with a \"record_id\" column")]
    MissingRecordIdHeader,
    #[error("line {line}: expected {expected} comma-separated cells, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cell {cell:?} is not \"0\" or \"1\"")]
    NonBinaryCell { line: usize, cell: String },
    #[error("record {id:?}: expected {expected} attribute values, found {found}")]
    RecordArity {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("record {id:?}: attribute values must be the bits 0 or 1")]
    NonBinaryValue { id: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("database has no records")]
    EmptyDatabase,
    #[error("{kind} {value:?} contains a comma or line break and cannot be written as CSV")]
    UnwritableField { kind: &'static str, value: String },
}

/// Ordered, duplicate-free list of attribute names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSchema {
    names: Vec<String>,
}

impl AttributeSchema {
    /// Builds a schema, rejecting empty lists, empty names, and duplicates.
    pub fn new<I, S>(names: I) -> Result<Self, DbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DbError::EmptySchema);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(DbError::EmptyAttributeName);
            }
            if !seen.insert(name.as_str()) {
                return Err(DbError::DuplicateAttribute(name.clone()));
            }
        }
        Ok(Self { names })
    }

    /// Number of attributes.
    pub fn arity(&self) -> usize {
        self.names.len()
    }

    /// Attribute names in schema order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Position of `name` in the schema, if present.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }
}

/// One subject: a record id plus one bit per schema attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRecord {
    id: String,
    bits: Vec<u8>,
}

impl AttributeRecord {
    /// Builds a record, rejecting any value other than 0 or 1.
    pub fn new(id: impl Into<String>, bits: Vec<u8>) -> Result<Self, DbError> {
        let id = id.into();
        if bits.iter().any(|&b| b > 1) {
            return Err(DbError::NonBinaryValue { id });
        }
        Ok(Self { id, bits })
    }

    /// Bypasses validation for bits already known to be binary.
    pub(crate) fn from_parts_unchecked(id: String, bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { id, bits }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }
}

/// A schema plus records, with unique ids and uniform arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDatabase {
    schema: AttributeSchema,
    records: Vec<AttributeRecord>,
}

impl AttributeDatabase {
    /// Builds a database, checking record arity against the schema and id
    /// uniqueness. Record order is preserved; it is part of the value.
    pub fn new(
        schema: AttributeSchema,
        records: Vec<AttributeRecord>,
    ) -> Result<Self, DbError> {
        let mut seen = HashSet::new();
        for record in &records {
            if record.bits.len() != schema.arity() {
                return Err(DbError::RecordArity {
                    id: record.id.clone(),
                    expected: schema.arity(),
                    found: record.bits.len(),
                });
            }
            if !seen.insert(record.id.as_str()) {
                return Err(DbError::DuplicateId(record.id.clone()));
            }
        }
        Ok(Self { schema, records })
    }

    /// Bypasses validation for parts that already satisfy the invariants.
    pub(crate) fn from_parts_unchecked(
        schema: AttributeSchema,
        records: Vec<AttributeRecord>,
    ) -> Self {
        Self { schema, records }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn records(&self) -> &[AttributeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Parses the CelebA annotation layout.
    ///
    /// Line 1 is the record count, line 2 the whitespace-separated attribute
    /// names, and each following non-empty line is `id` plus one `-1`/`1`
    /// token per attribute (-1 maps to bit 0, 1 to bit 1). Tokens may be
    /// separated by any run of spaces or tabs, as in the published files.
    pub fn parse_celeba(input: &str) -> Result<Self, DbError> {
        let mut lines = input.lines();
        let count_line = lines.next().unwrap_or("");
        let declared: usize = count_line
            .trim()
            .parse()
            .map_err(|_| DbError::InvalidCountLine(count_line.trim().to_string()))?;
        let names: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if names.is_empty() {
            return Err(DbError::EmptyNameLine);
        }
        let schema = AttributeSchema::new(names)?;

        let mut records = Vec::with_capacity(declared);
        let mut seen = HashSet::new();
        // Data rows start on line 3; `enumerate` restarts at 0 here.
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 3;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue; // ignore blank lines, including a trailing one
            }
            if tokens.len() - 1 != schema.arity() {
                return Err(DbError::RowArity {
                    line: lineno,
                    expected: schema.arity(),
                    found: tokens.len() - 1,
                });
            }
            let id = tokens[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(DbError::DuplicateRecordId { line: lineno, id });
            }
            let mut bits = Vec::with_capacity(schema.arity());
            for token in &tokens[1..] {
                bits.push(match *token {
                    "-1" => 0,
                    "1" => 1,
                    other => {
                        return Err(DbError::BadToken {
                            line: lineno,
                            token: other.to_string(),
                        })
                    }
                });
            }
            records.push(AttributeRecord { id, bits });
        }
        if records.len() != declared {
            return Err(DbError::CountMismatch {
                declared,
                actual: records.len(),
            });
        }
        Ok(Self { schema, records })
    }

    /// Parses the CSV dialect written by [`to_csv`](Self::to_csv).
    ///
    /// Comma-separated with no quoting; the header row is `record_id` followed
    /// by the attribute names; every data cell must be exactly `0` or `1`.
    pub fn parse_csv(input: &str) -> Result<Self, DbError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(DbError::MissingRecordIdHeader)?;
        let mut columns = header.split(',');
        if columns.next() != Some("record_id") {
            return Err(DbError::MissingRecordIdHeader);
        }
        let schema = AttributeSchema::new(columns)?;

        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != schema.arity() + 1 {
                return Err(DbError::RaggedRow {
                    line: lineno,
                    expected: schema.arity() + 1,
                    found: cells.len(),
                });
            }
            let id = cells[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(DbError::DuplicateRecordId { line: lineno, id });
            }
            let mut bits = Vec::with_capacity(schema.arity());
            for cell in &cells[1..] {
                bits.push(match *cell {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(DbError::NonBinaryCell {
                            line: lineno,
                            cell: other.to_string(),
                        })
                    }
                });
            }
            records.push(AttributeRecord { id, bits });
        }
        Ok(Self { schema, records })
    }

    /// Serializes to the CSV dialect. Every row, the header included, ends in
    /// a newline. Errors if an id or attribute name contains a comma or line
    /// break, since the dialect has no quoting to hide them in.
    pub fn to_csv(&self) -> Result<String, DbError> {
        for name in self.schema.names() {
            check_writable("attribute name", name)?;
        }
        let mut out = String::with_capacity(16 * (self.records.len() + 1));
        out.push_str("record_id");
        for name in self.schema.names() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for record in &self.records {
            check_writable("record id", &record.id)?;
            out.push_str(&record.id);
            for &bit in &record.bits {
                out.push(',');
                out.push(if bit == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Projects onto the named attributes, keeping every record (ids and
    /// order included) and the given attribute order.
    pub fn select(&self, names: &[&str]) -> Result<Self, DbError> {
        let mut indices = Vec::with_capacity(names.len());
        for name in names {
            indices.push(
                self.schema
                    .index_of(name)
                    .ok_or_else(|| DbError::UnknownAttribute((*name).to_string()))?,
            );
        }
        let schema = AttributeSchema::new(names.iter().copied())?;
        let records = self
            .records
            .iter()
            .map(|r| AttributeRecord {
                id: r.id.clone(),
                bits: indices.iter().map(|&i| r.bits[i]).collect(),
            })
            .collect();
        Ok(Self { schema, records })
    }

    /// Fraction of records with bit 1 for `name`. Exactly `ones / n` in f64.
    pub fn frequency(&self, name: &str) -> Result<f64, DbError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| DbError::UnknownAttribute(name.to_string()))?;
        if self.records.is_empty() {
            return Err(DbError::EmptyDatabase);
        }
        let ones = self.records.iter().filter(|r| r.bits[idx] == 1).count();
        Ok(ones as f64 / self.records.len() as f64)
    }

    /// Explains why `self` and `other` cannot be compared record-by-record,
    /// or `None` if they share a schema and the same ids in the same order.
    pub fn alignment_mismatch(&self, other: &Self) -> Option<String> {
        if self.schema != other.schema {
            return Some("schemas differ".to_string());
        }
        if self.records.len() != other.records.len() {
            return Some(format!(
                "record counts differ: {} vs {}",
                self.records.len(),
                other.records.len()
            ));
        }
        for (i, (a, b)) in self.records.iter().zip(&other.records).enumerate() {
            if a.id != b.id {
                return Some(format!(
                    "record ids diverge at row {}: {:?} vs {:?}",
                    i, a.id, b.id
                ));
            }
        }
        None
    }
}

fn check_writable(kind: &'static str, value: &str) -> Result<(), DbError> {
    if value.contains([',', '\n', '\r']) {
        return Err(DbError::UnwritableField {
            kind,
            value: value.to_string(),
        });
    }
    Ok(())
}
