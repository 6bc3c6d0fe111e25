use std::path::Path;

use super::{write_atomic, FormatError};
use crate::correction::CorrectionReport;

/// Writes the report as pretty JSON, replacing any previous file atomically.
pub fn write_report(report: &CorrectionReport, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_atomic(path.as_ref(), &json)?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<CorrectionReport, FormatError> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}
