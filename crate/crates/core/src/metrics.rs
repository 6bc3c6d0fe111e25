//! Depth error between two captures of the same scene.

use serde::{Deserialize, Serialize};

use crate::model::{ModelError, PolarImage};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthDiff {
    /// Pixels valid in both images (and inside the mask, if any).
    pub pixels: usize,
    pub rmse_m: f64,
    pub max_abs_m: f64,
}

/// Plain per-pixel distance difference `a - b`; no wrap-around.
pub fn depth_difference(
    a: &PolarImage,
    b: &PolarImage,
    within: Option<&Raster<bool>>,
) -> Result<DepthDiff, ModelError> {
    if a.dims() != b.dims() || within.is_some_and(|m| m.dims() != a.dims()) {
        let (rows, cols) = a.dims();
        let (found_rows, found_cols) = b.dims();
        return Err(ModelError::DimensionMismatch {
            what: "distance",
            rows,
            cols,
            found_rows,
            found_cols,
        });
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut n = 0usize;
    for i in 0..a.distance().len() {
        if a.invalid().as_slice()[i]
            || b.invalid().as_slice()[i]
            || within.is_some_and(|m| !m.as_slice()[i])
        {
            continue;
        }
        let e = a.distance().as_slice()[i] - b.distance().as_slice()[i];
        sum += e * e;
        max = max.max(e.abs());
        n += 1;
    }
    Ok(DepthDiff {
        pixels: n,
        rmse_m: if n > 0 { (sum / n as f64).sqrt() } else { 0.0 },
        max_abs_m: max,
    })
}
