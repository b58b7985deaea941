//! JSON Lines storage for case records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::gen::{CaseRecord, DATASET_SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: schema {found} is not supported (expected {DATASET_SCHEMA})")]
    Schema { line: usize, found: u32 },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

pub fn write_jsonl<W: Write>(mut out: W, cases: &[CaseRecord]) -> Result<(), DatasetError> {
    for c in cases {
        serde_json::to_writer(&mut out, c).map_err(|source| DatasetError::Json { line: 0, source })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses records, validating schema, scenes and programs. Blank lines are
/// skipped.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<CaseRecord>, DatasetError> {
    let mut cases = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let case: CaseRecord =
            serde_json::from_str(&line).map_err(|source| DatasetError::Json { line: line_no, source })?;
        if case.schema != DATASET_SCHEMA {
            return Err(DatasetError::Schema {
                line: line_no,
                found: case.schema,
            });
        }
        let invalid = |message: String| DatasetError::Invalid { line: line_no, message };
        case.scenes.validate().map_err(|e| invalid(e.to_string()))?;
        case.program().map_err(|e| invalid(e.to_string()))?;
        cases.push(case);
    }
    Ok(cases)
}

pub fn save(path: &Path, cases: &[CaseRecord]) -> Result<(), DatasetError> {
    write_jsonl(BufWriter::new(File::create(path)?), cases)
}

pub fn load(path: &Path) -> Result<Vec<CaseRecord>, DatasetError> {
    read_jsonl(BufReader::new(File::open(path)?))
}
