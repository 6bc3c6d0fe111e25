//! Estimation and removal of the perturbing vector.
//!
//! The white and black halves of a contrast tag lie at the same distance, so their
//! true vectors share one phase direction. A perturbing vector `p` added to both
//! moves the measured points `W` and `B` off that ray but keeps them on a line
//! through `p` parallel to it. Any vector `c` on the line `WB` equalizes the two
//! phases after subtraction:
//!
//! * With one tag the shortest such vector is used: the foot of the perpendicular
//!   from the origin onto `WB`.
//! * With two tags at different depths the lines meet in exactly one point, which
//!   corrects both tags at once.
//!
//! All tolerances are relative: component differences are compared against
//! `tol * max(|W|, |B|)` and chord parallelism against `tol * |dW1| * |dW2|`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{pixel_to_polar, vector_to_polar, ModelError, PolarImage, VectorImage};
use crate::raster::Raster;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_RATIO: f64 = 0.5;
/// Smallest phase difference (rad) between a tag's halves that counts as
/// distortion, about 0.6 um at 20 MHz. It sits above the rounding of f32 files.
pub const CONSISTENT_PHASE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorrectionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("region {region} exceeds the {rows}x{cols} image")]
    RegionOutOfBounds {
        region: RectRegion,
        rows: usize,
        cols: usize,
    },
    #[error("tag '{label}': white region {white} overlaps black region {black}")]
    OverlappingTagRegions {
        label: String,
        white: RectRegion,
        black: RectRegion,
    },
    #[error("no valid pixels in region {0}")]
    NoValidPixels(RectRegion),
    #[error("no valid pixels in image")]
    EmptyImage,
    #[error("non-finite region statistics")]
    NonFiniteStats,
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("{}", consistent_message(*.tag))]
    TagConsistent { tag: Option<usize> },
    #[error(
        "degenerate tag geometry: chords are parallel, tags are effectively at the same distance"
    )]
    DegenerateGeometry,
    #[error("expected 1 or 2 tags, got {0}")]
    TagCount(usize),
    #[error("segment threshold {threshold_m} m outside [0, {range}) m")]
    InvalidThreshold { threshold_m: f64, range: f64 },
    #[error("mask is {found_rows}x{found_cols}, image is {rows}x{cols}")]
    MaskDimension {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("ambiguous plane assignment: plans {first} and {second} overlap")]
    AmbiguousPlaneAssignment { first: usize, second: usize },
    #[error("invalid plausibility ratio {0}")]
    InvalidRatio(f64),
    #[error("correction rejected by plausibility gate: {}", .0.plausibility.as_ref().map(|d| d.to_string()).unwrap_or_default())]
    Implausible(Box<CorrectionReport>),
}

fn consistent_message(tag: Option<usize>) -> String {
    match tag {
        Some(i) => format!("tag {i} already consistent; nothing to correct"),
        None => "tag already consistent; nothing to correct".to_string(),
    }
}

impl CorrectionError {
    /// True for failures caused by the tag data itself rather than bad arguments.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            CorrectionError::TagConsistent { .. } | CorrectionError::DegenerateGeometry
        )
    }
}

/// Pixel rectangle with inclusive origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RectRegion {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl RectRegion {
    pub fn new(
        row0: usize,
        col0: usize,
        rows: usize,
        cols: usize,
    ) -> Result<Self, CorrectionError> {
        if rows == 0 || cols == 0 {
            return Err(CorrectionError::InvalidRegion(format!(
                "{row0},{col0},{rows},{cols} has zero extent"
            )));
        }
        Ok(Self {
            row0,
            col0,
            rows,
            cols,
        })
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    pub fn check_bounds(&self, rows: usize, cols: usize) -> Result<(), CorrectionError> {
        let fits = self.rows >= 1
            && self.cols >= 1
            && self.row0.checked_add(self.rows).is_some_and(|e| e <= rows)
            && self.col0.checked_add(self.cols).is_some_and(|e| e <= cols);
        if fits {
            Ok(())
        } else {
            Err(CorrectionError::RegionOutOfBounds {
                region: *self,
                rows,
                cols,
            })
        }
    }

    pub fn overlaps(&self, other: &RectRegion) -> bool {
        self.row0 < other.row0 + other.rows
            && other.row0 < self.row0 + self.rows
            && self.col0 < other.col0 + other.cols
            && other.col0 < self.col0 + self.cols
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..self.row0 + self.rows).contains(&row)
            && (self.col0..self.col0 + self.cols).contains(&col)
    }

    pub fn center(&self) -> (usize, usize) {
        (self.row0 + self.rows / 2, self.col0 + self.cols / 2)
    }

    /// `(row, col)` of every pixel, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row0..self.row0 + self.rows)
            .flat_map(move |r| (self.col0..self.col0 + self.cols).map(move |c| (r, c)))
    }
}

impl fmt::Display for RectRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.row0, self.col0, self.rows, self.cols)
    }
}

/// Parses `row,col,rows,cols`.
impl FromStr for RectRegion {
    type Err = CorrectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(CorrectionError::InvalidRegion(format!(
                "'{s}' is not row,col,rows,cols"
            )));
        }
        let mut v = [0usize; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| {
                CorrectionError::InvalidRegion(format!("'{p}' in '{s}' is not a pixel count"))
            })?;
        }
        RectRegion::new(v[0], v[1], v[2], v[3])
    }
}

/// The white and black zones selected on one tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagObservation {
    pub white: RectRegion,
    pub black: RectRegion,
    #[serde(default)]
    pub label: String,
}

impl TagObservation {
    pub fn new(
        white: RectRegion,
        black: RectRegion,
        label: impl Into<String>,
    ) -> Result<Self, CorrectionError> {
        let tag = Self {
            white,
            black,
            label: label.into(),
        };
        tag.check_disjoint()?;
        Ok(tag)
    }

    fn check_disjoint(&self) -> Result<(), CorrectionError> {
        if self.white.overlaps(&self.black) {
            return Err(CorrectionError::OverlappingTagRegions {
                label: self.label.clone(),
                white: self.white,
                black: self.black,
            });
        }
        Ok(())
    }

    /// Tag from two `row,col,rows,cols` strings.
    pub fn parse(
        white: &str,
        black: &str,
        label: impl Into<String>,
    ) -> Result<Self, CorrectionError> {
        Self::new(white.parse()?, black.parse()?, label)
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<(), CorrectionError> {
        self.white.check_bounds(rows, cols)?;
        self.black.check_bounds(rows, cols)?;
        self.check_disjoint()
    }
}

/// Mean vector over the valid pixels of a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub mean_ix: f64,
    pub mean_iy: f64,
    pub pixel_count: usize,
    /// Pixels in the rectangle, masked or not.
    pub region_pixels: usize,
    pub mean_amplitude: f64,
}

impl RegionStats {
    /// Statistics of a single known vector.
    pub fn point(ix: f64, iy: f64) -> Self {
        Self {
            mean_ix: ix,
            mean_iy: iy,
            pixel_count: 1,
            region_pixels: 1,
            mean_amplitude: ix.hypot(iy),
        }
    }

    pub fn mean(&self) -> (f64, f64) {
        (self.mean_ix, self.mean_iy)
    }

    fn is_finite(&self) -> bool {
        self.mean_ix.is_finite() && self.mean_iy.is_finite()
    }

    /// More than half the rectangle was lost to the invalid mask.
    pub fn mostly_masked(&self) -> bool {
        self.pixel_count * 2 < self.region_pixels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "one-tag")]
    OneTag,
    #[serde(rename = "two-tag")]
    TwoTag,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::OneTag => "one-tag",
            Method::TwoTag => "two-tag",
        })
    }
}

/// Estimated perturbing vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionVector {
    pub icx: f64,
    pub icy: f64,
    pub amplitude: f64,
    pub method: Method,
    #[serde(default)]
    pub source_tags: Vec<TagObservation>,
}

impl CorrectionVector {
    pub fn new(icx: f64, icy: f64, method: Method) -> Self {
        Self {
            icx,
            icy,
            amplitude: icx.hypot(icy),
            method,
            source_tags: Vec::new(),
        }
    }

    pub fn with_tags(mut self, tags: Vec<TagObservation>) -> Self {
        self.source_tags = tags;
        self
    }

    pub fn negated(&self) -> Self {
        Self {
            icx: -self.icx,
            icy: -self.icy,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `d < threshold`
    #[serde(rename = "closer-than")]
    CloserThan,
    /// `d >= threshold`, the complement of [`Relation::CloserThan`] on valid pixels.
    #[serde(rename = "farther-than")]
    FartherThan,
}

impl Relation {
    pub fn holds(&self, distance_m: f64, threshold_m: f64) -> bool {
        match self {
            Relation::CloserThan => distance_m < threshold_m,
            Relation::FartherThan => distance_m >= threshold_m,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::CloserThan => "closer-than",
            Relation::FartherThan => "farther-than",
        })
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closer" | "closer-than" => Ok(Relation::CloserThan),
            "farther" | "farther-than" => Ok(Relation::FartherThan),
            other => Err(format!(
                "unknown relation '{other}', expected closer-than or farther-than"
            )),
        }
    }
}

/// Pixels belonging to one depth plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMask {
    pub mask: Raster<bool>,
    pub threshold_m: f64,
    pub relation: Relation,
}

impl SegmentMask {
    pub fn new(mask: Raster<bool>, threshold_m: f64, relation: Relation) -> Self {
        Self {
            mask,
            threshold_m,
            relation,
        }
    }

    pub fn count(&self) -> usize {
        self.mask.count_true()
    }
}

fn check_tol(tol: f64) -> Result<(), CorrectionError> {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(CorrectionError::InvalidTolerance(tol))
    }
}

pub fn region_mean(v: &VectorImage, region: &RectRegion) -> Result<RegionStats, CorrectionError> {
    let (rows, cols) = v.dims();
    region.check_bounds(rows, cols)?;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (r, c) in region.pixels() {
        if v.is_valid(r, c) {
            let (x, y) = v.vector(r, c);
            sx += x;
            sy += y;
            n += 1;
        }
    }
    if n == 0 {
        return Err(CorrectionError::NoValidPixels(*region));
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    Ok(RegionStats {
        mean_ix: mx,
        mean_iy: my,
        pixel_count: n,
        region_pixels: region.area(),
        mean_amplitude: mx.hypot(my),
    })
}

/// Chord `B - W` of a tag, or an error when the two points coincide within `tol`.
fn tag_chord(
    white: &RegionStats,
    black: &RegionStats,
    tol: f64,
    tag: Option<usize>,
) -> Result<(f64, f64, bool, bool), CorrectionError> {
    if !white.is_finite() || !black.is_finite() {
        return Err(CorrectionError::NonFiniteStats);
    }
    let threshold = tol * white.mean_amplitude.max(black.mean_amplitude);
    let dx = black.mean_ix - white.mean_ix;
    let dy = black.mean_iy - white.mean_iy;
    let flat_x = dx.abs() <= threshold;
    let flat_y = dy.abs() <= threshold;
    // equal phases: the chord passes through the origin with W and B on the same side
    let (xw, yw) = white.mean();
    let (xb, yb) = black.mean();
    let phase_tol = tol.max(CONSISTENT_PHASE_TOL);
    let same_phase = (xw * yb - yw * xb).abs()
        <= phase_tol * white.mean_amplitude * black.mean_amplitude
        && xw * xb + yw * yb > 0.0;
    if (flat_x && flat_y) || same_phase {
        return Err(CorrectionError::TagConsistent { tag });
    }
    Ok((dx, dy, flat_x, flat_y))
}

/// Minimum-norm vector that equalizes the phases of one tag's white and black zones.
///
/// Computed as the projection of the origin onto the line through `W` and `B`,
/// `c = W - ((W . d) / |d|^2) d` with `d = B - W`. An axis-aligned chord gives
/// `(xw, 0)` or `(0, yw)` directly.
pub fn single_tag_correction(
    white: &RegionStats,
    black: &RegionStats,
    tol: f64,
) -> Result<CorrectionVector, CorrectionError> {
    check_tol(tol)?;
    let (dx, dy, flat_x, flat_y) = tag_chord(white, black, tol, None)?;
    let (xw, yw) = white.mean();
    let (icx, icy) = if flat_x {
        (xw, 0.0)
    } else if flat_y {
        (0.0, yw)
    } else {
        let t = (xw * dx + yw * dy) / (dx * dx + dy * dy);
        (xw - t * dx, yw - t * dy)
    };
    Ok(CorrectionVector::new(icx, icy, Method::OneTag))
}

/// Vector that equalizes the phases of two tags at once: the intersection of
/// the chords `W1B1` and `W2B2`.
pub fn two_tag_correction(
    white1: &RegionStats,
    black1: &RegionStats,
    white2: &RegionStats,
    black2: &RegionStats,
    tol: f64,
) -> Result<CorrectionVector, CorrectionError> {
    check_tol(tol)?;
    let (dx1, dy1, ..) = tag_chord(white1, black1, tol, Some(1))?;
    let (dx2, dy2, ..) = tag_chord(white2, black2, tol, Some(2))?;

    let denom = dy1 * dx2 - dx1 * dy2;
    if denom.abs() <= tol * dx1.hypot(dy1) * dx2.hypot(dy2) {
        return Err(CorrectionError::DegenerateGeometry);
    }
    // line offsets: cross(B_i, W_i)
    let k1 = black1.mean_ix * white1.mean_iy - white1.mean_ix * black1.mean_iy;
    let k2 = black2.mean_ix * white2.mean_iy - white2.mean_ix * black2.mean_iy;
    let icx = -(k1 * dx2 - k2 * dx1) / denom;
    let icy = -(k1 * dy2 - k2 * dy1) / denom;
    if !icx.is_finite() || !icy.is_finite() {
        return Err(CorrectionError::DegenerateGeometry);
    }
    Ok(CorrectionVector::new(icx, icy, Method::TwoTag))
}

#[inline]
fn corrected_pixel(x: f64, y: f64, c: &CorrectionVector) -> (f64, f64, bool) {
    let nx = x - c.icx;
    let ny = y - c.icy;
    let vanished = nx.hypot(ny) <= DEFAULT_TOL * c.amplitude;
    (nx, ny, vanished)
}

/// Subtracts `c` from every pixel. Pixels that cancel to zero become invalid.
pub fn apply_correction(v: &VectorImage, c: &CorrectionVector) -> VectorImage {
    let mut ix = v.ix().clone();
    let mut iy = v.iy().clone();
    let mut invalid = v.invalid().clone();
    for ((x, y), bad) in ix
        .as_mut_slice()
        .iter_mut()
        .zip(iy.as_mut_slice().iter_mut())
        .zip(invalid.as_mut_slice().iter_mut())
    {
        let (nx, ny, vanished) = corrected_pixel(*x, *y, c);
        *x = nx;
        *y = ny;
        *bad |= vanished;
    }
    VectorImage::from_parts(*v.config(), ix, iy, invalid)
}

/// Both sides of the plausibility inequality `|c| < ratio * mean amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityDiagnostic {
    pub correction_amplitude: f64,
    pub mean_amplitude: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl fmt::Display for PlausibilityDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|c| = {:.6} {} {:.6} = {} x mean amplitude {:.6}",
            self.correction_amplitude,
            if self.passed { "<" } else { ">=" },
            self.threshold,
            self.ratio,
            self.mean_amplitude
        )
    }
}

pub fn plausibility_check(
    v: &VectorImage,
    c: &CorrectionVector,
    ratio: f64,
) -> Result<PlausibilityDiagnostic, CorrectionError> {
    plausibility_check_within(v, c, ratio, None)
}

/// Plausibility over the valid pixels of `within` (the whole image when `None`).
pub fn plausibility_check_within(
    v: &VectorImage,
    c: &CorrectionVector,
    ratio: f64,
    within: Option<&Raster<bool>>,
) -> Result<PlausibilityDiagnostic, CorrectionError> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(CorrectionError::InvalidRatio(ratio));
    }
    if let Some(m) = within {
        check_mask_dims(v, m)?;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, ((&x, &y), &bad)) in v
        .ix()
        .iter()
        .zip(v.iy().iter())
        .zip(v.invalid().iter())
        .enumerate()
    {
        if bad || within.is_some_and(|m| !m.as_slice()[i]) {
            continue;
        }
        sum += x.hypot(y);
        n += 1;
    }
    if n == 0 {
        return Err(CorrectionError::EmptyImage);
    }
    let mean_amplitude = sum / n as f64;
    let threshold = ratio * mean_amplitude;
    Ok(PlausibilityDiagnostic {
        correction_amplitude: c.amplitude,
        mean_amplitude,
        ratio,
        threshold,
        passed: c.amplitude < threshold,
    })
}

fn check_mask_dims(v: &VectorImage, m: &Raster<bool>) -> Result<(), CorrectionError> {
    let (rows, cols) = v.dims();
    if m.dims() != (rows, cols) {
        return Err(CorrectionError::MaskDimension {
            rows,
            cols,
            found_rows: m.rows(),
            found_cols: m.cols(),
        });
    }
    Ok(())
}

pub fn segment_by_distance(
    p: &PolarImage,
    threshold_m: f64,
    relation: Relation,
) -> Result<SegmentMask, CorrectionError> {
    let range = p.config().non_ambiguity_range();
    if !(threshold_m.is_finite() && (0.0..range).contains(&threshold_m)) {
        return Err(CorrectionError::InvalidThreshold { threshold_m, range });
    }
    let (rows, cols) = p.dims();
    let mask: Vec<bool> = p
        .distance()
        .iter()
        .zip(p.invalid().iter())
        .map(|(&d, &bad)| !bad && relation.holds(d, threshold_m))
        .collect();
    Ok(SegmentMask::new(
        Raster::from_vec(rows, cols, mask).expect("shape"),
        threshold_m,
        relation,
    ))
}

/// Applies each plan's vector inside its own mask; uncovered pixels pass through.
pub fn per_plane_correct(
    v: &VectorImage,
    plans: &[(SegmentMask, CorrectionVector)],
) -> Result<VectorImage, CorrectionError> {
    let (rows, cols) = v.dims();
    let mut owner: Vec<Option<usize>> = vec![None; rows * cols];
    for (k, (seg, _)) in plans.iter().enumerate() {
        check_mask_dims(v, &seg.mask)?;
        for (slot, &m) in owner.iter_mut().zip(seg.mask.iter()) {
            if m {
                if let Some(first) = *slot {
                    return Err(CorrectionError::AmbiguousPlaneAssignment { first, second: k });
                }
                *slot = Some(k);
            }
        }
    }
    let mut ix = v.ix().clone();
    let mut iy = v.iy().clone();
    let mut invalid = v.invalid().clone();
    for (i, plan) in owner.iter().enumerate() {
        if let Some(k) = *plan {
            let (nx, ny, vanished) =
                corrected_pixel(ix.as_slice()[i], iy.as_slice()[i], &plans[k].1);
            ix.as_mut_slice()[i] = nx;
            iy.as_mut_slice()[i] = ny;
            invalid.as_mut_slice()[i] |= vanished;
        }
    }
    Ok(VectorImage::from_parts(*v.config(), ix, iy, invalid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRule {
    pub threshold_m: f64,
    pub relation: Relation,
}

impl SegmentRule {
    /// Rule from a millimeter threshold, the unit used on every user-facing surface.
    pub fn from_mm(threshold_mm: f64, relation: Relation) -> Self {
        Self {
            threshold_m: threshold_mm / 1000.0,
            relation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub ratio: f64,
    pub force: bool,
    pub tol: f64,
    /// Restricts the correction (and the plausibility average) to one depth plane.
    pub segment: Option<SegmentRule>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            ratio: DEFAULT_RATIO,
            force: false,
            tol: DEFAULT_TOL,
            segment: None,
        }
    }
}

/// Per-tag readings, distances in millimeters of the region-mean vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagReport {
    pub label: String,
    pub white: RectRegion,
    pub black: RectRegion,
    pub white_pixels: usize,
    pub black_pixels: usize,
    pub white_before_mm: Option<f64>,
    pub black_before_mm: Option<f64>,
    pub white_after_mm: Option<f64>,
    pub black_after_mm: Option<f64>,
}

impl TagReport {
    pub fn discrepancy_before_mm(&self) -> Option<f64> {
        Some(self.white_before_mm? - self.black_before_mm?)
    }

    pub fn discrepancy_after_mm(&self) -> Option<f64> {
        Some(self.white_after_mm? - self.black_after_mm?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub threshold_mm: f64,
    pub relation: Relation,
    pub pixel_count: usize,
}

/// Outcome record of one correction run; serialized as the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub method: Option<Method>,
    pub correction: Option<CorrectionVector>,
    pub plausibility: Option<PlausibilityDiagnostic>,
    pub tags: Vec<TagReport>,
    pub segment: Option<SegmentReport>,
    pub applied: bool,
    pub forced: bool,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl CorrectionReport {
    /// Report for a run that failed before a correction could be applied.
    pub fn failure(tags: Vec<TagReport>, error: &CorrectionError) -> Self {
        let (method, correction, plausibility, segment, warnings) = match error {
            CorrectionError::Implausible(r) => (
                r.method,
                r.correction.clone(),
                r.plausibility,
                r.segment.clone(),
                r.warnings.clone(),
            ),
            _ => (None, None, None, None, Vec::new()),
        };
        Self {
            method,
            correction,
            plausibility,
            tags,
            segment,
            applied: false,
            forced: false,
            warnings,
            error: Some(error.to_string()),
        }
    }
}

fn region_distance_mm(v: &VectorImage, stats: &RegionStats) -> f64 {
    let (_, d) = pixel_to_polar(stats.mean_ix, stats.mean_iy, v.config());
    d * 1000.0
}

/// Reads every tag's white/black distances without correcting anything.
pub fn measure_tags(v: &VectorImage, tags: &[TagObservation]) -> Vec<TagReport> {
    tags.iter()
        .map(|t| {
            let w = region_mean(v, &t.white).ok();
            let b = region_mean(v, &t.black).ok();
            TagReport {
                label: t.label.clone(),
                white: t.white,
                black: t.black,
                white_pixels: w.map_or(0, |s| s.pixel_count),
                black_pixels: b.map_or(0, |s| s.pixel_count),
                white_before_mm: w.map(|s| region_distance_mm(v, &s)),
                black_before_mm: b.map(|s| region_distance_mm(v, &s)),
                white_after_mm: None,
                black_after_mm: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub corrected: PolarImage,
    pub corrected_vector: VectorImage,
    pub correction: CorrectionVector,
    pub mask: Option<SegmentMask>,
    pub report: CorrectionReport,
}

/// Full correction of one capture: vector conversion, estimation from one or two
/// tags, plausibility gate, subtraction (optionally inside one depth segment) and
/// conversion back to amplitude/distance.
pub fn correct_pipeline(
    p: &PolarImage,
    tags: &[TagObservation],
    options: &PipelineOptions,
) -> Result<PipelineOutcome, CorrectionError> {
    if !(1..=2).contains(&tags.len()) {
        return Err(CorrectionError::TagCount(tags.len()));
    }
    check_tol(options.tol)?;
    if !(options.ratio.is_finite() && options.ratio > 0.0) {
        return Err(CorrectionError::InvalidRatio(options.ratio));
    }
    if let Some(rule) = options.segment {
        let range = p.config().non_ambiguity_range();
        if !(rule.threshold_m.is_finite() && (0.0..range).contains(&rule.threshold_m)) {
            return Err(CorrectionError::InvalidThreshold {
                threshold_m: rule.threshold_m,
                range,
            });
        }
    }
    let (rows, cols) = p.dims();
    for t in tags {
        t.validate(rows, cols)?;
    }
    let v = p.to_vector();
    let mut warnings = Vec::new();
    let mut stats = Vec::with_capacity(tags.len());
    for t in tags {
        let w = region_mean(&v, &t.white)?;
        let b = region_mean(&v, &t.black)?;
        for (zone, s) in [("white", &w), ("black", &b)] {
            if s.mostly_masked() {
                warnings.push(format!(
                    "tag '{}' {zone} region: only {} of {} pixels valid",
                    t.label, s.pixel_count, s.region_pixels
                ));
            }
        }
        stats.push((w, b));
    }

    let correction = match stats.as_slice() {
        [(w, b)] => single_tag_correction(w, b, options.tol)?,
        [(w1, b1), (w2, b2)] => two_tag_correction(w1, b1, w2, b2, options.tol)?,
        _ => unreachable!("tag count checked"),
    }
    .with_tags(tags.to_vec());

    let mask = options
        .segment
        .map(|rule| segment_by_distance(p, rule.threshold_m, rule.relation))
        .transpose()?;
    let diagnostic = plausibility_check_within(
        &v,
        &correction,
        options.ratio,
        mask.as_ref().map(|m| &m.mask),
    )?;

    let mut tag_reports = measure_tags(&v, tags);
    for ((w, b), t) in stats.iter().zip(tags) {
        let wc = (w.mean_ix - correction.icx, w.mean_iy - correction.icy);
        let bc = (b.mean_ix - correction.icx, b.mean_iy - correction.icy);
        if wc.0 * bc.0 + wc.1 * bc.1 < 0.0 {
            warnings.push(format!(
                "tag '{}': corrected white and black vectors are antiparallel; their distances differ by half the non-ambiguity range",
                t.label
            ));
        }
    }
    let segment_report = mask.as_ref().map(|m| SegmentReport {
        threshold_mm: m.threshold_m * 1000.0,
        relation: m.relation,
        pixel_count: m.count(),
    });

    let mut report = CorrectionReport {
        method: Some(correction.method),
        correction: Some(correction.clone()),
        plausibility: Some(diagnostic),
        tags: Vec::new(),
        segment: segment_report,
        applied: false,
        forced: false,
        warnings,
        error: None,
    };

    if !diagnostic.passed && !options.force {
        report.tags = tag_reports;
        report.error = Some(format!("plausibility gate failed: {diagnostic}"));
        return Err(CorrectionError::Implausible(Box::new(report)));
    }
    if !diagnostic.passed {
        report.forced = true;
        report
            .warnings
            .push(format!("plausibility gate overridden: {diagnostic}"));
    }

    let corrected_vector = match &mask {
        Some(m) => per_plane_correct(&v, &[(m.clone(), correction.clone())])?,
        None => apply_correction(&v, &correction),
    };
    for (tr, after) in tag_reports
        .iter_mut()
        .zip(measure_tags(&corrected_vector, tags))
    {
        tr.white_after_mm = after.white_before_mm;
        tr.black_after_mm = after.black_before_mm;
    }
    report.tags = tag_reports;
    report.applied = true;

    Ok(PipelineOutcome {
        corrected: vector_to_polar(&corrected_vector),
        corrected_vector,
        correction,
        mask,
        report,
    })
}
