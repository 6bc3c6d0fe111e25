//! Correction of Time-of-Flight depth images using black/white contrast tags.
//!
//! A ToF pixel measures a 2D signal vector `(ix, iy)` whose phase encodes distance.
//! Flare and diffuse light add a slowly varying perturbing vector to every pixel,
//! which bends the measured distance of dark surfaces more than bright ones. The
//! two halves of a contrast tag share one true distance, so any disagreement in
//! their measured distance constrains the perturbing vector:
//!
//! * one tag: the minimum-norm vector that equalizes both halves
//!   ([`correction::single_tag_correction`]),
//! * two tags at different depths: the unique vector that equalizes both tags
//!   ([`correction::two_tag_correction`]).
//!
//! The vector is subtracted from the vector image and the amplitude/distance images
//! are recomputed. [`simulator`] renders ground-truth scenes for testing, and
//! [`io`] holds the TOFC binary format, graymap export and JSON report schema.

pub mod correction;
pub mod io;
pub mod metrics;
pub mod model;
pub mod raster;
pub mod simulator;

pub use correction::{
    apply_correction, correct_pipeline, per_plane_correct, plausibility_check, region_mean,
    segment_by_distance, single_tag_correction, two_tag_correction, CorrectionError,
    CorrectionReport, CorrectionVector, Method, PipelineOptions, PlausibilityDiagnostic,
    RectRegion, RegionStats, Relation, SegmentMask, TagObservation,
};
pub use metrics::{depth_difference, DepthDiff};
pub use model::{
    non_ambiguity_range, polar_to_vector, vector_from_raw, vector_to_polar, CameraConfig,
    ModelError, PolarImage, RawFrame, VectorImage,
};
pub use raster::Raster;
