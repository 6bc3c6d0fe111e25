//! File formats: TOFC binary images, 16-bit graymaps and JSON reports.

pub mod graymap;
pub mod report;
pub mod tofc;

use std::io::Write;
use std::path::Path;

pub use graymap::{
    decode_graymap, encode_graymap, encode_mask, export_graymap, render_view, view_window, ViewKind,
};
pub use report::{read_report, write_report};
pub use tofc::{
    decode_tofc, encode_tofc, narrow_polar, read_tofc, write_tofc, TofcImage, TofcKind,
};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unexpected end at offset {offset}")]
    UnexpectedEnd { offset: usize },
    #[error("bad magic {found:?} at offset 0, expected \"TOFC\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported version {version} at offset 4")]
    UnsupportedVersion { version: u16 },
    #[error("unknown image kind {kind} at offset 6")]
    UnknownKind { kind: u16 },
    #[error("invalid {what} {value} at offset {offset}")]
    BadHeader {
        what: &'static str,
        offset: usize,
        value: String,
    },
    #[error("channel count {found} at offset 24 does not match kind {kind} (expected {expected})")]
    ChannelMismatch {
        kind: u16,
        expected: u16,
        found: u16,
    },
    #[error("trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("CRC mismatch at offset {offset}: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch {
        offset: usize,
        stored: u32,
        computed: u32,
    },
    #[error("invalid value at offset {offset}: {message}")]
    InvalidValue { offset: usize, message: String },
    #[error("degenerate gray range: min {min} must be below max {max}")]
    DegenerateRange { min: f64, max: f64 },
    #[error("malformed graymap: {0}")]
    Graymap(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
