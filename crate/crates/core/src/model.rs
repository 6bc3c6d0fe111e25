//! Signal representations of a ToF capture and the exact conversions between them.
//!
//! A pixel's four demodulation samples `S1..S4` reduce to a vector
//! `(ix, iy) = (S2 - S4, S1 - S3)`. Its polar form is the amplitude
//! `a = |(ix, iy)|` and the distance `d = c0 * (phi + pi) / (4 * pi * f)`, where
//! `phi` is the four-quadrant phase of the vector taken on `[-pi, pi)`.
//!
//! Pixels with zero amplitude have no phase. They report distance 0 and are
//! recorded in an invalid mask that every later stage carries forward.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::raster::Raster;

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
pub const DEFAULT_MOD_FREQ_HZ: f64 = 20.0e6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid camera configuration: {0}")]
    InvalidConfig(String),
    #[error("{what} is {found_rows}x{found_cols}, expected {rows}x{cols}")]
    DimensionMismatch {
        what: &'static str,
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("non-finite {what} value at ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },
    #[error("negative amplitude {value} at ({row}, {col})")]
    NegativeAmplitude { row: usize, col: usize, value: f64 },
    #[error("distance {value} m at ({row}, {col}) outside [0, {range}) m")]
    DistanceOutOfRange {
        row: usize,
        col: usize,
        value: f64,
        range: f64,
    },
}

/// Camera geometry and modulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraConfigRepr")]
pub struct CameraConfig {
    mod_freq_hz: f64,
    light_speed_m_s: f64,
    rows: usize,
    cols: usize,
}

#[derive(Deserialize)]
struct CameraConfigRepr {
    #[serde(default = "default_mod_freq")]
    mod_freq_hz: f64,
    #[serde(default = "default_light_speed")]
    light_speed_m_s: f64,
    rows: usize,
    cols: usize,
}

fn default_mod_freq() -> f64 {
    DEFAULT_MOD_FREQ_HZ
}

fn default_light_speed() -> f64 {
    SPEED_OF_LIGHT_M_S
}

impl TryFrom<CameraConfigRepr> for CameraConfig {
    type Error = ModelError;

    fn try_from(r: CameraConfigRepr) -> Result<Self, Self::Error> {
        CameraConfig::new(r.rows, r.cols, r.mod_freq_hz)?.with_light_speed(r.light_speed_m_s)
    }
}

impl CameraConfig {
    pub fn new(rows: usize, cols: usize, mod_freq_hz: f64) -> Result<Self, ModelError> {
        if rows == 0 || cols == 0 {
            return Err(ModelError::InvalidConfig(format!(
                "image must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if !(mod_freq_hz.is_finite() && mod_freq_hz > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "modulation frequency must be positive, got {mod_freq_hz}"
            )));
        }
        Ok(Self {
            mod_freq_hz,
            light_speed_m_s: SPEED_OF_LIGHT_M_S,
            rows,
            cols,
        })
    }

    pub fn with_light_speed(mut self, light_speed_m_s: f64) -> Result<Self, ModelError> {
        if !(light_speed_m_s.is_finite() && light_speed_m_s > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "light speed must be positive, got {light_speed_m_s}"
            )));
        }
        self.light_speed_m_s = light_speed_m_s;
        if !self.non_ambiguity_range().is_finite() {
            return Err(ModelError::InvalidConfig(
                "non-ambiguity range is not finite".into(),
            ));
        }
        Ok(self)
    }

    /// Same camera, different raster size.
    pub fn with_dims(mut self, rows: usize, cols: usize) -> Result<Self, ModelError> {
        if rows == 0 || cols == 0 {
            return Err(ModelError::InvalidConfig(format!(
                "image must be at least 1x1, got {rows}x{cols}"
            )));
        }
        self.rows = rows;
        self.cols = cols;
        Ok(self)
    }

    pub fn mod_freq_hz(&self) -> f64 {
        self.mod_freq_hz
    }

    pub fn light_speed_m_s(&self) -> f64 {
        self.light_speed_m_s
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Largest distance measurable without phase wrapping, `c0 / (2 f)`.
    pub fn non_ambiguity_range(&self) -> f64 {
        self.light_speed_m_s / (2.0 * self.mod_freq_hz)
    }

    /// Distance of a phase on `[-pi, pi)`. Values that round up to the full
    /// range wrap to 0, the same point on the phase circle.
    pub fn phase_to_distance(&self, phase: f64) -> f64 {
        let d = self.light_speed_m_s * (phase + PI) / (4.0 * PI * self.mod_freq_hz);
        if d >= self.non_ambiguity_range() {
            0.0
        } else {
            d
        }
    }

    pub fn distance_to_phase(&self, distance_m: f64) -> f64 {
        4.0 * PI * self.mod_freq_hz * distance_m / self.light_speed_m_s - PI
    }

    fn check_raster<T>(&self, what: &'static str, r: &Raster<T>) -> Result<(), ModelError> {
        if r.dims() != self.dims() {
            return Err(ModelError::DimensionMismatch {
                what,
                rows: self.rows,
                cols: self.cols,
                found_rows: r.rows(),
                found_cols: r.cols(),
            });
        }
        Ok(())
    }
}

pub fn non_ambiguity_range(config: &CameraConfig) -> f64 {
    config.non_ambiguity_range()
}

/// Four-quadrant phase on `[-pi, pi)`.
#[inline]
pub fn phase_of(ix: f64, iy: f64) -> f64 {
    let phi = iy.atan2(ix);
    if phi >= PI {
        -PI
    } else {
        phi
    }
}

/// Amplitude and distance of one pixel vector. Zero vectors map to `(0, 0)`.
#[inline]
pub fn pixel_to_polar(ix: f64, iy: f64, config: &CameraConfig) -> (f64, f64) {
    let a = ix.hypot(iy);
    if a == 0.0 {
        return (0.0, 0.0);
    }
    (a, config.phase_to_distance(phase_of(ix, iy)))
}

#[inline]
pub fn pixel_from_polar(amplitude: f64, distance_m: f64, config: &CameraConfig) -> (f64, f64) {
    let phi = config.distance_to_phase(distance_m);
    (amplitude * phi.cos(), amplitude * phi.sin())
}

fn check_finite(what: &'static str, r: &Raster<f64>) -> Result<(), ModelError> {
    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite {
            what,
            row: i / r.cols(),
            col: i % r.cols(),
        });
    }
    Ok(())
}

/// The four raw phase samples of a capture.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    s1: Raster<f64>,
    s2: Raster<f64>,
    s3: Raster<f64>,
    s4: Raster<f64>,
}

impl RawFrame {
    pub fn new(
        s1: Raster<f64>,
        s2: Raster<f64>,
        s3: Raster<f64>,
        s4: Raster<f64>,
    ) -> Result<Self, ModelError> {
        for (what, s) in [("s2", &s2), ("s3", &s3), ("s4", &s4)] {
            if !s.same_shape(&s1) {
                return Err(ModelError::DimensionMismatch {
                    what,
                    rows: s1.rows(),
                    cols: s1.cols(),
                    found_rows: s.rows(),
                    found_cols: s.cols(),
                });
            }
        }
        for (what, s) in [("s1", &s1), ("s2", &s2), ("s3", &s3), ("s4", &s4)] {
            check_finite(what, s)?;
        }
        Ok(Self { s1, s2, s3, s4 })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.s1.dims()
    }

    pub fn samples(&self) -> [&Raster<f64>; 4] {
        [&self.s1, &self.s2, &self.s3, &self.s4]
    }
}

/// Per-pixel signal vectors `(ix, iy)` plus the invalid-pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorImage {
    config: CameraConfig,
    ix: Raster<f64>,
    iy: Raster<f64>,
    invalid: Raster<bool>,
}

impl VectorImage {
    /// Builds a vector image; exact zero vectors start out invalid.
    pub fn new(config: CameraConfig, ix: Raster<f64>, iy: Raster<f64>) -> Result<Self, ModelError> {
        config.check_raster("ix", &ix)?;
        config.check_raster("iy", &iy)?;
        check_finite("ix", &ix)?;
        check_finite("iy", &iy)?;
        let invalid = Raster::from_vec(
            ix.rows(),
            ix.cols(),
            ix.iter()
                .zip(iy.iter())
                .map(|(&x, &y)| x == 0.0 && y == 0.0)
                .collect(),
        )
        .expect("shape checked");
        Ok(Self {
            config,
            ix,
            iy,
            invalid,
        })
    }

    /// Marks additional pixels invalid. Already invalid pixels stay invalid.
    pub fn with_invalid(mut self, extra: &Raster<bool>) -> Result<Self, ModelError> {
        self.config.check_raster("invalid mask", extra)?;
        for (m, &e) in self.invalid.as_mut_slice().iter_mut().zip(extra.iter()) {
            *m |= e;
        }
        Ok(self)
    }

    pub(crate) fn from_parts(
        config: CameraConfig,
        ix: Raster<f64>,
        iy: Raster<f64>,
        invalid: Raster<bool>,
    ) -> Self {
        debug_assert!(ix.dims() == config.dims() && iy.dims() == config.dims());
        debug_assert!(invalid.dims() == config.dims());
        Self {
            config,
            ix,
            iy,
            invalid,
        }
    }

    pub fn config(&self) -> &CameraConfig {
        &self.config
    }

    pub fn ix(&self) -> &Raster<f64> {
        &self.ix
    }

    pub fn iy(&self) -> &Raster<f64> {
        &self.iy
    }

    pub fn invalid(&self) -> &Raster<bool> {
        &self.invalid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.config.dims()
    }

    #[inline]
    pub fn vector(&self, row: usize, col: usize) -> (f64, f64) {
        (self.ix.get(row, col), self.iy.get(row, col))
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        !self.invalid.get(row, col)
    }

    pub fn valid_count(&self) -> usize {
        self.invalid.len() - self.invalid.count_true()
    }

    pub fn to_polar(&self) -> PolarImage {
        vector_to_polar(self)
    }
}

/// Amplitude and distance (meters) per pixel plus the invalid-pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarImage {
    config: CameraConfig,
    amplitude: Raster<f64>,
    distance: Raster<f64>,
    invalid: Raster<bool>,
}

impl PolarImage {
    /// Builds a polar image; zero-amplitude pixels start out invalid.
    pub fn new(
        config: CameraConfig,
        amplitude: Raster<f64>,
        distance: Raster<f64>,
    ) -> Result<Self, ModelError> {
        config.check_raster("amplitude", &amplitude)?;
        config.check_raster("distance", &distance)?;
        check_finite("amplitude", &amplitude)?;
        check_finite("distance", &distance)?;
        let range = config.non_ambiguity_range();
        let cols = config.cols();
        for (i, (&a, &d)) in amplitude.iter().zip(distance.iter()).enumerate() {
            if a < 0.0 {
                return Err(ModelError::NegativeAmplitude {
                    row: i / cols,
                    col: i % cols,
                    value: a,
                });
            }
            if !(0.0..range).contains(&d) {
                return Err(ModelError::DistanceOutOfRange {
                    row: i / cols,
                    col: i % cols,
                    value: d,
                    range,
                });
            }
        }
        let invalid = amplitude.map(|&a| a == 0.0);
        Ok(Self {
            config,
            amplitude,
            distance,
            invalid,
        })
    }

    pub fn with_invalid(mut self, extra: &Raster<bool>) -> Result<Self, ModelError> {
        self.config.check_raster("invalid mask", extra)?;
        for (m, &e) in self.invalid.as_mut_slice().iter_mut().zip(extra.iter()) {
            *m |= e;
        }
        Ok(self)
    }

    pub fn config(&self) -> &CameraConfig {
        &self.config
    }

    pub fn amplitude(&self) -> &Raster<f64> {
        &self.amplitude
    }

    pub fn distance(&self) -> &Raster<f64> {
        &self.distance
    }

    pub fn invalid(&self) -> &Raster<bool> {
        &self.invalid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.config.dims()
    }

    pub fn valid_count(&self) -> usize {
        self.invalid.len() - self.invalid.count_true()
    }

    pub fn to_vector(&self) -> VectorImage {
        polar_to_vector(self)
    }
}

/// `iy = s1 - s3`, `ix = s2 - s4`.
pub fn vector_from_raw(frame: &RawFrame, config: &CameraConfig) -> Result<VectorImage, ModelError> {
    config.check_raster("raw frame", &frame.s1)?;
    let (rows, cols) = config.dims();
    let diff = |a: &Raster<f64>, b: &Raster<f64>| {
        Raster::from_vec(
            rows,
            cols,
            a.iter().zip(b.iter()).map(|(&p, &q)| p - q).collect(),
        )
        .expect("shape checked")
    };
    let iy = diff(&frame.s1, &frame.s3);
    let ix = diff(&frame.s2, &frame.s4);
    VectorImage::new(*config, ix, iy)
}

pub fn vector_to_polar(v: &VectorImage) -> PolarImage {
    let (rows, cols) = v.dims();
    let n = rows * cols;
    let mut amplitude = Vec::with_capacity(n);
    let mut distance = Vec::with_capacity(n);
    let mut invalid = Vec::with_capacity(n);
    for ((&x, &y), &bad) in v.ix.iter().zip(v.iy.iter()).zip(v.invalid.iter()) {
        let (a, d) = pixel_to_polar(x, y, &v.config);
        amplitude.push(a);
        distance.push(d);
        invalid.push(bad || a == 0.0);
    }
    PolarImage {
        config: v.config,
        amplitude: Raster::from_vec(rows, cols, amplitude).expect("shape"),
        distance: Raster::from_vec(rows, cols, distance).expect("shape"),
        invalid: Raster::from_vec(rows, cols, invalid).expect("shape"),
    }
}

pub fn polar_to_vector(p: &PolarImage) -> VectorImage {
    let (rows, cols) = p.dims();
    let n = rows * cols;
    let mut ix = Vec::with_capacity(n);
    let mut iy = Vec::with_capacity(n);
    let mut invalid = Vec::with_capacity(n);
    for ((&a, &d), &bad) in p
        .amplitude
        .iter()
        .zip(p.distance.iter())
        .zip(p.invalid.iter())
    {
        let (x, y) = pixel_from_polar(a, d, &p.config);
        ix.push(x);
        iy.push(y);
        invalid.push(bad || (x == 0.0 && y == 0.0));
    }
    VectorImage {
        config: p.config,
        ix: Raster::from_vec(rows, cols, ix).expect("shape"),
        iy: Raster::from_vec(rows, cols, iy).expect("shape"),
        invalid: Raster::from_vec(rows, cols, invalid).expect("shape"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg(rows: usize, cols: usize) -> CameraConfig {
        CameraConfig::new(rows, cols, DEFAULT_MOD_FREQ_HZ).unwrap()
    }

    fn single(ix: f64, iy: f64) -> VectorImage {
        VectorImage::new(
            cfg(1, 1),
            Raster::filled(1, 1, ix),
            Raster::filled(1, 1, iy),
        )
        .unwrap()
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(CameraConfig::new(0, 4, 20e6).is_err());
        assert!(CameraConfig::new(4, 0, 20e6).is_err());
        assert!(CameraConfig::new(4, 4, 0.0).is_err());
        assert!(CameraConfig::new(4, 4, -1.0).is_err());
        assert!(CameraConfig::new(4, 4, f64::NAN).is_err());
        assert!(cfg(1, 1).with_light_speed(0.0).is_err());
    }

    #[test]
    fn config_deserialize_validates() {
        let ok: CameraConfig = serde_json::from_str(r#"{"rows":2,"cols":3}"#).unwrap();
        assert_eq!(ok.mod_freq_hz(), DEFAULT_MOD_FREQ_HZ);
        assert!(serde_json::from_str::<CameraConfig>(r#"{"rows":0,"cols":3}"#).is_err());
    }

    #[test]
    fn non_ambiguity_range_values() {
        assert_relative_eq!(
            cfg(1, 1).non_ambiguity_range(),
            7.494_811_45,
            max_relative = 1e-12
        );
        let unit = CameraConfig::new(1, 1, SPEED_OF_LIGHT_M_S / 2.0).unwrap();
        assert_eq!(unit.non_ambiguity_range(), 1.0);
        let doubled = CameraConfig::new(1, 1, 40e6).unwrap();
        assert_relative_eq!(
            doubled.non_ambiguity_range() * 2.0,
            cfg(1, 1).non_ambiguity_range(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn raw_to_vector_single_pixel() {
        let r = |v: f64| Raster::filled(1, 1, v);
        let frame = RawFrame::new(r(5.0), r(7.0), r(2.0), r(3.0)).unwrap();
        let v = vector_from_raw(&frame, &cfg(1, 1)).unwrap();
        assert_eq!(v.vector(0, 0), (4.0, 3.0));

        let flat = RawFrame::new(r(9.5), r(9.5), r(9.5), r(9.5)).unwrap();
        let v = vector_from_raw(&flat, &cfg(1, 1)).unwrap();
        assert_eq!(v.vector(0, 0), (0.0, 0.0));
        assert!(!v.is_valid(0, 0));
    }

    #[test]
    fn raw_to_vector_per_pixel() {
        let s: Vec<Raster<f64>> = (0..4)
            .map(|k| {
                Raster::from_fn(2, 2, |r, c| {
                    (k * 7 + r * 3 + c * 5) as f64 * 0.25 + k as f64
                })
            })
            .collect();
        let frame = RawFrame::new(s[0].clone(), s[1].clone(), s[2].clone(), s[3].clone()).unwrap();
        let v = vector_from_raw(&frame, &cfg(2, 2)).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let expect_x = s[1].get(r, c) - s[3].get(r, c);
                let expect_y = s[0].get(r, c) - s[2].get(r, c);
                assert_eq!(v.vector(r, c), (expect_x, expect_y));
            }
        }
    }

    #[test]
    fn raw_dimension_mismatch() {
        let a = Raster::filled(2, 2, 1.0);
        let b = Raster::filled(2, 3, 1.0);
        assert!(RawFrame::new(a.clone(), b, a.clone(), a.clone()).is_err());
        let frame = RawFrame::new(a.clone(), a.clone(), a.clone(), a).unwrap();
        assert!(matches!(
            vector_from_raw(&frame, &cfg(3, 3)),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn polar_of_unit_diagonal() {
        let p = vector_to_polar(&single(1.0, 1.0));
        assert_relative_eq!(p.amplitude().get(0, 0), 2f64.sqrt(), max_relative = 1e-15);
        // c0 * (5 pi / 4) / (4 pi * 2e7) = 5 c0 / 3.2e8
        assert_relative_eq!(
            p.distance().get(0, 0),
            4.684_257_156_25,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_phase_is_half_range() {
        let p = vector_to_polar(&single(3.0, 0.0));
        let c = cfg(1, 1);
        assert_relative_eq!(
            p.distance().get(0, 0),
            SPEED_OF_LIGHT_M_S / (4.0 * c.mod_freq_hz()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn minus_pi_maps_to_zero_distance() {
        let c = cfg(1, 1);
        assert_eq!(c.phase_to_distance(-PI), 0.0);
        // atan2(+0, -1) = pi, which belongs to -pi on the half-open interval
        let p = vector_to_polar(&single(-2.0, 0.0));
        assert_eq!(p.distance().get(0, 0), 0.0);
        let p = vector_to_polar(&single(-2.0, -0.0));
        assert_eq!(p.distance().get(0, 0), 0.0);
    }

    #[test]
    fn zero_vector_is_flagged() {
        let p = vector_to_polar(&single(0.0, 0.0));
        assert_eq!(p.amplitude().get(0, 0), 0.0);
        assert_eq!(p.distance().get(0, 0), 0.0);
        assert!(p.invalid().get(0, 0));
    }

    #[test]
    fn polar_inverse_examples() {
        let c = cfg(1, 1);
        let quarter = SPEED_OF_LIGHT_M_S / (4.0 * c.mod_freq_hz());
        let p =
            PolarImage::new(c, Raster::filled(1, 1, 2.0), Raster::filled(1, 1, quarter)).unwrap();
        let (x, y) = polar_to_vector(&p).vector(0, 0);
        assert_relative_eq!(x, 2.0, max_relative = 1e-15);
        assert!(y.abs() < 1e-15);

        let p = PolarImage::new(c, Raster::filled(1, 1, 0.0), Raster::filled(1, 1, 3.3)).unwrap();
        let v = polar_to_vector(&p);
        assert_eq!(v.vector(0, 0), (0.0, 0.0));
        assert!(!v.is_valid(0, 0));
    }

    #[test]
    fn polar_rejects_out_of_range() {
        let c = cfg(1, 1);
        let a = Raster::filled(1, 1, 1.0);
        let range = c.non_ambiguity_range();
        for bad in [-0.1, range, range + 1.0] {
            assert!(matches!(
                PolarImage::new(c, a.clone(), Raster::filled(1, 1, bad)),
                Err(ModelError::DistanceOutOfRange { .. })
            ));
        }
        assert!(matches!(
            PolarImage::new(c, Raster::filled(1, 1, -1.0), Raster::filled(1, 1, 1.0)),
            Err(ModelError::NegativeAmplitude { .. })
        ));
    }

    #[test]
    fn vector_rejects_non_finite() {
        let err = VectorImage::new(
            cfg(1, 2),
            Raster::from_vec(1, 2, vec![1.0, f64::NAN]).unwrap(),
            Raster::filled(1, 2, 0.0),
        )
        .unwrap_err();
        assert_eq!(
            err,
            ModelError::NonFinite {
                what: "ix",
                row: 0,
                col: 1
            }
        );
    }

    proptest! {
        #[test]
        fn round_trip_vector_polar_vector(
            x in -1e4f64..1e4, y in -1e4f64..1e4,
        ) {
            prop_assume!(x.hypot(y) > 1e-6);
            let v = single(x, y);
            let back = polar_to_vector(&vector_to_polar(&v));
            let (bx, by) = back.vector(0, 0);
            let a = x.hypot(y);
            prop_assert!((bx - x).hypot(by - y) <= 1e-12 * a, "({x},{y}) -> ({bx},{by})");
        }

        #[test]
        fn polar_invariants_hold(x in -1e6f64..1e6, y in -1e6f64..1e6) {
            let p = vector_to_polar(&single(x, y));
            let d = p.distance().get(0, 0);
            prop_assert!(p.amplitude().get(0, 0) >= 0.0);
            prop_assert!(d >= 0.0 && d < p.config().non_ambiguity_range());
        }

        #[test]
        fn raw_is_linear(s in proptest::array::uniform4(-1e3f64..1e3), k in -8i32..8) {
            // power-of-two scale keeps the products exact
            let k = 2f64.powi(k);
            let r = |v: f64| Raster::filled(1, 1, v);
            let c = cfg(1, 1);
            let base = vector_from_raw(&RawFrame::new(r(s[0]), r(s[1]), r(s[2]), r(s[3])).unwrap(), &c).unwrap();
            let scaled = vector_from_raw(&RawFrame::new(r(s[0] * k), r(s[1] * k), r(s[2] * k), r(s[3] * k)).unwrap(), &c).unwrap();
            let (x, y) = base.vector(0, 0);
            prop_assert_eq!(scaled.vector(0, 0), (x * k, y * k));
        }

        #[test]
        fn phase_increases_with_distance(d1 in 0.0f64..7.49, d2 in 0.0f64..7.49) {
            prop_assume!(d1 < d2);
            let c = cfg(1, 1);
            prop_assert!(c.distance_to_phase(d1) < c.distance_to_phase(d2));
        }
    }
}
