//! 16-bit binary portable graymaps (PGM `P5`, maxval 65535, big-endian samples).
//!
//! A value `x` maps to `floor((x - min) / (max - min) * 65535)`, clamped to
//! `[0, 65535]`; NaN maps to 0.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{write_atomic, FormatError};
use crate::model::PolarImage;
use crate::raster::Raster;

pub const MAX_LEVEL: u16 = 65535;

#[inline]
pub fn gray_level(x: f64, min: f64, max: f64) -> u16 {
    let t = (x - min) / (max - min) * f64::from(MAX_LEVEL);
    if t.is_nan() {
        0
    } else {
        t.floor().clamp(0.0, f64::from(MAX_LEVEL)) as u16
    }
}

fn header(rows: usize, cols: usize) -> Vec<u8> {
    format!("P5\n{cols} {rows}\n{MAX_LEVEL}\n").into_bytes()
}

pub fn encode_graymap(raster: &Raster<f64>, min: f64, max: f64) -> Result<Vec<u8>, FormatError> {
    if !(min.is_finite() && max.is_finite() && min < max) {
        return Err(FormatError::DegenerateRange { min, max });
    }
    let mut out = header(raster.rows(), raster.cols());
    out.reserve(raster.len() * 2);
    for &x in raster.iter() {
        out.extend_from_slice(&gray_level(x, min, max).to_be_bytes());
    }
    Ok(out)
}

/// Mask as a graymap: true pixels white, false pixels black.
pub fn encode_mask(mask: &Raster<bool>) -> Vec<u8> {
    let mut out = header(mask.rows(), mask.cols());
    for &m in mask.iter() {
        out.extend_from_slice(&(if m { MAX_LEVEL } else { 0 }).to_be_bytes());
    }
    out
}

pub fn export_graymap(
    raster: &Raster<f64>,
    path: impl AsRef<Path>,
    min: f64,
    max: f64,
) -> Result<(), FormatError> {
    let bytes = encode_graymap(raster, min, max)?;
    write_atomic(path.as_ref(), &bytes)?;
    Ok(())
}

/// Parses a graymap written by this module.
pub fn decode_graymap(bytes: &[u8]) -> Result<Raster<u16>, FormatError> {
    let bad = |m: &str| FormatError::Graymap(m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary graymap"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (cols, rows, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != usize::from(MAX_LEVEL) {
        return Err(bad("expected maxval 65535"));
    }
    let data = bytes.get(pos..).unwrap_or_default();
    if data.len() != rows * cols * 2 {
        return Err(bad("sample count does not match header"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Raster::from_vec(rows, cols, samples).map_err(|e| bad(&e.to_string()))
}

/// Which polar raster to visualize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    /// Distance in millimeters.
    Distance,
    Amplitude,
}

impl FromStr for ViewKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distance" => Ok(ViewKind::Distance),
            "amplitude" => Ok(ViewKind::Amplitude),
            other => Err(format!(
                "unknown view '{other}', expected distance or amplitude"
            )),
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewKind::Distance => "distance",
            ViewKind::Amplitude => "amplitude",
        })
    }
}

/// Default gray window: `[0, range]` mm for distance, `[0, max amplitude]` otherwise.
pub fn view_window(p: &PolarImage, kind: ViewKind) -> (f64, f64) {
    match kind {
        ViewKind::Distance => (0.0, p.config().non_ambiguity_range() * 1000.0),
        ViewKind::Amplitude => {
            let peak = p.amplitude().iter().fold(0.0f64, |m, &a| m.max(a));
            (0.0, if peak > 0.0 { peak } else { 1.0 })
        }
    }
}

/// Graymap of a polar image; invalid pixels are black. Missing window bounds
/// fall back to [`view_window`].
pub fn render_view(
    p: &PolarImage,
    kind: ViewKind,
    min: Option<f64>,
    max: Option<f64>,
) -> Result<Vec<u8>, FormatError> {
    let (dmin, dmax) = view_window(p, kind);
    let (min, max) = (min.unwrap_or(dmin), max.unwrap_or(dmax));
    let source = match kind {
        ViewKind::Distance => p.distance().map(|d| d * 1000.0),
        ViewKind::Amplitude => p.amplitude().clone(),
    };
    let mut raster = source;
    for (x, &bad) in raster.as_mut_slice().iter_mut().zip(p.invalid().iter()) {
        if bad {
            *x = f64::NAN;
        }
    }
    encode_graymap(&raster, min, max)
}
