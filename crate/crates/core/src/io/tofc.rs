//! TOFC: little-endian container for vector, polar and raw captures.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "TOFC"
//!      4     2  version (u16) = 1
//!      6     2  kind (u16): 1 = vector, 2 = polar, 3 = raw
//!      8     4  rows (u32)
//!     12     4  cols (u32)
//!     16     8  modulation frequency in Hz (f64)
//!     24     2  channel count (u16): vector 2, polar 3, raw 4
//!     26     *  channel planes, row-major f32, one plane after another
//!    end-4   4  CRC-32 (IEEE) of every preceding byte (u32)
//! ```
//!
//! Planes: vector `ix, iy`; polar `amplitude, distance (m), invalid mask (0/1)`;
//! raw `s1, s2, s3, s4`. Values are stored as f32 and widened exactly on read.
//! A polar distance whose f32 rounding reaches the non-ambiguity range is stored
//! as 0, the same phase.

use std::path::Path;

use super::{write_atomic, FormatError};
use crate::model::{CameraConfig, PolarImage, RawFrame, VectorImage};
use crate::raster::Raster;

pub const MAGIC: &[u8; 4] = b"TOFC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum TofcKind {
    Vector = 1,
    Polar = 2,
    Raw = 3,
}

impl TofcKind {
    pub fn channels(self) -> u16 {
        match self {
            TofcKind::Vector => 2,
            TofcKind::Polar => 3,
            TofcKind::Raw => 4,
        }
    }

    fn from_u16(v: u16) -> Option<Self> {
        match v {
            1 => Some(TofcKind::Vector),
            2 => Some(TofcKind::Polar),
            3 => Some(TofcKind::Raw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TofcImage {
    Vector(VectorImage),
    Polar(PolarImage),
    Raw(RawFrame, CameraConfig),
}

impl TofcImage {
    pub fn kind(&self) -> TofcKind {
        match self {
            TofcImage::Vector(_) => TofcKind::Vector,
            TofcImage::Polar(_) => TofcKind::Polar,
            TofcImage::Raw(..) => TofcKind::Raw,
        }
    }

    pub fn config(&self) -> &CameraConfig {
        match self {
            TofcImage::Vector(v) => v.config(),
            TofcImage::Polar(p) => p.config(),
            TofcImage::Raw(_, c) => c,
        }
    }

    /// Amplitude/distance view of any kind.
    pub fn to_polar(&self) -> Result<PolarImage, crate::model::ModelError> {
        Ok(match self {
            TofcImage::Vector(v) => v.to_polar(),
            TofcImage::Polar(p) => p.clone(),
            TofcImage::Raw(frame, cfg) => crate::model::vector_from_raw(frame, cfg)?.to_polar(),
        })
    }
}

fn push_plane(out: &mut Vec<u8>, plane: impl Iterator<Item = f32>) {
    for v in plane {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn stored_distance(d: f64, range: f64) -> f32 {
    let q = d as f32;
    if f64::from(q) >= range {
        0.0
    } else {
        q
    }
}

pub fn encode_tofc(img: &TofcImage) -> Vec<u8> {
    let cfg = img.config();
    let (rows, cols) = cfg.dims();
    let kind = img.kind();
    let mut out = Vec::with_capacity(HEADER_LEN + kind.channels() as usize * rows * cols * 4 + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(kind as u16).to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&cfg.mod_freq_hz().to_le_bytes());
    out.extend_from_slice(&kind.channels().to_le_bytes());
    match img {
        TofcImage::Vector(v) => {
            push_plane(&mut out, v.ix().iter().map(|&x| x as f32));
            push_plane(&mut out, v.iy().iter().map(|&y| y as f32));
        }
        TofcImage::Polar(p) => {
            let range = cfg.non_ambiguity_range();
            push_plane(&mut out, p.amplitude().iter().map(|&a| a as f32));
            push_plane(
                &mut out,
                p.distance().iter().map(|&d| stored_distance(d, range)),
            );
            push_plane(
                &mut out,
                p.invalid().iter().map(|&m| if m { 1.0 } else { 0.0 }),
            );
        }
        TofcImage::Raw(frame, _) => {
            for s in frame.samples() {
                push_plane(&mut out, s.iter().map(|&x| x as f32));
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_tofc(bytes: &[u8]) -> Result<TofcImage, FormatError> {
    let need = |n: usize| {
        if bytes.len() < n {
            Err(FormatError::UnexpectedEnd {
                offset: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    need(4)?;
    if &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic {
            found: bytes[..4].to_vec(),
        });
    }
    need(HEADER_LEN)?;
    let version = read_u16(bytes, 4);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { version });
    }
    let kind_raw = read_u16(bytes, 6);
    let kind = TofcKind::from_u16(kind_raw).ok_or(FormatError::UnknownKind { kind: kind_raw })?;
    let rows = read_u32(bytes, 8) as usize;
    let cols = read_u32(bytes, 12) as usize;
    for (what, offset, v) in [("rows", 8, rows), ("cols", 12, cols)] {
        if v == 0 {
            return Err(FormatError::BadHeader {
                what,
                offset,
                value: v.to_string(),
            });
        }
    }
    let freq = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let config = CameraConfig::new(rows, cols, freq).map_err(|_| FormatError::BadHeader {
        what: "modulation frequency",
        offset: 16,
        value: freq.to_string(),
    })?;
    let channels = read_u16(bytes, 24);
    if channels != kind.channels() {
        return Err(FormatError::ChannelMismatch {
            kind: kind_raw,
            expected: kind.channels(),
            found: channels,
        });
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| FormatError::BadHeader {
            what: "dimensions",
            offset: 8,
            value: format!("{rows}x{cols}"),
        })?;
    let payload = n
        .checked_mul(channels as usize * 4)
        .and_then(|p| p.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| FormatError::BadHeader {
            what: "dimensions",
            offset: 8,
            value: format!("{rows}x{cols}"),
        })?;
    need(payload)?;
    if bytes.len() > payload {
        return Err(FormatError::TrailingBytes { offset: payload });
    }
    let crc_at = payload - 4;
    let stored = read_u32(bytes, crc_at);
    let computed = crc32fast::hash(&bytes[..crc_at]);
    if stored != computed {
        return Err(FormatError::CrcMismatch {
            offset: crc_at,
            stored,
            computed,
        });
    }

    let plane = |k: usize| -> Result<Raster<f64>, FormatError> {
        let start = HEADER_LEN + k * n * 4;
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let at = start + i * 4;
            let v = f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(FormatError::InvalidValue {
                    offset: at,
                    message: format!("non-finite sample {v}"),
                });
            }
            data.push(f64::from(v));
        }
        Ok(Raster::from_vec(rows, cols, data).expect("shape"))
    };
    let value_offset = |k: usize, i: usize| HEADER_LEN + (k * n + i) * 4;
    let bad = |offset: usize, e: crate::model::ModelError| FormatError::InvalidValue {
        offset,
        message: e.to_string(),
    };

    Ok(match kind {
        TofcKind::Vector => {
            let v =
                VectorImage::new(config, plane(0)?, plane(1)?).map_err(|e| bad(HEADER_LEN, e))?;
            TofcImage::Vector(v)
        }
        TofcKind::Polar => {
            let amplitude = plane(0)?;
            let distance = plane(1)?;
            let mask_plane = plane(2)?;
            let range = config.non_ambiguity_range();
            for i in 0..n {
                let a = amplitude.as_slice()[i];
                if a < 0.0 {
                    return Err(FormatError::InvalidValue {
                        offset: value_offset(0, i),
                        message: format!("negative amplitude {a}"),
                    });
                }
                let d = distance.as_slice()[i];
                if !(0.0..range).contains(&d) {
                    return Err(FormatError::InvalidValue {
                        offset: value_offset(1, i),
                        message: format!("distance {d} m outside [0, {range}) m"),
                    });
                }
                let m = mask_plane.as_slice()[i];
                if m != 0.0 && m != 1.0 {
                    return Err(FormatError::InvalidValue {
                        offset: value_offset(2, i),
                        message: format!("mask value {m} is neither 0 nor 1"),
                    });
                }
            }
            let mask = mask_plane.map(|&m| m == 1.0);
            let p = PolarImage::new(config, amplitude, distance)
                .and_then(|p| p.with_invalid(&mask))
                .map_err(|e| bad(HEADER_LEN, e))?;
            TofcImage::Polar(p)
        }
        TofcKind::Raw => {
            let frame = RawFrame::new(plane(0)?, plane(1)?, plane(2)?, plane(3)?)
                .map_err(|e| bad(HEADER_LEN, e))?;
            TofcImage::Raw(frame, config)
        }
    })
}

pub fn read_tofc(path: impl AsRef<Path>) -> Result<TofcImage, FormatError> {
    let bytes = std::fs::read(path)?;
    decode_tofc(&bytes)
}

pub fn write_tofc(img: &TofcImage, path: impl AsRef<Path>) -> Result<(), FormatError> {
    write_atomic(path.as_ref(), &encode_tofc(img))?;
    Ok(())
}

/// The polar image exactly as it reads back from a TOFC file.
pub fn narrow_polar(p: &PolarImage) -> PolarImage {
    match decode_tofc(&encode_tofc(&TofcImage::Polar(p.clone()))) {
        Ok(TofcImage::Polar(q)) => q,
        other => unreachable!("polar encoding reads back as polar: {other:?}"),
    }
}
