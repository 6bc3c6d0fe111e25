//! Ground-truth scenes and perturbed captures.
//!
//! A scene is a stack of flat rectangles, each at one distance with one
//! reflectivity, topped by contrast tags. The rendered truth is perturbed by an
//! additive vector field (flare and diffuse light) and optional Gaussian noise.
//!
//! Smooth fields are quadratic polynomials in normalized pixel-center
//! coordinates `u = 2 (col + 0.5) / cols - 1` and `v = 2 (row + 0.5) / rows - 1`,
//! with coefficients ordered `[1, u, v, u^2, u v, v^2]`.
//!
//! Noise is drawn from `ChaCha8Rng::seed_from_u64(seed)` through a
//! `rand_distr::Normal`, in row-major order, x component before y.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::correction::{RectRegion, TagObservation};
use crate::model::{vector_to_polar, CameraConfig, PolarImage, RawFrame, VectorImage};
use crate::raster::Raster;

pub mod fixtures;

pub const DEFAULT_MAX_PERTURBATION_FRACTION: f64 = 0.5;

/// Relative weights of the smooth-field terms `[1, u, v, u^2, uv, v^2]` used by
/// [`PerturbationField::random_smooth`].
pub const SMOOTH_TERM_WEIGHTS: [f64; 6] = [1.0, 0.2, 0.2, 0.1, 0.1, 0.1];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("scene JSON line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("negative sample at ({row}, {col}): offset {offset} too small")]
    NegativeSample { row: usize, col: usize, offset: f64 },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePatch {
    pub region: RectRegion,
    pub distance_m: f64,
    pub reflectivity: f64,
}

/// A contrast tag: white and black zones at one distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTag {
    pub white: RectRegion,
    pub black: RectRegion,
    #[serde(default)]
    pub label: String,
    pub distance_m: f64,
    pub white_reflectivity: f64,
    pub black_reflectivity: f64,
}

impl SceneTag {
    pub fn observation(&self) -> TagObservation {
        TagObservation {
            white: self.white,
            black: self.black,
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PerturbationField {
    Constant {
        px: f64,
        py: f64,
    },
    Smooth {
        x_coeffs: [f64; 6],
        y_coeffs: [f64; 6],
    },
}

impl Default for PerturbationField {
    fn default() -> Self {
        PerturbationField::Constant { px: 0.0, py: 0.0 }
    }
}

#[inline]
fn smooth_terms(row: usize, col: usize, rows: usize, cols: usize) -> [f64; 6] {
    let u = 2.0 * (col as f64 + 0.5) / cols as f64 - 1.0;
    let v = 2.0 * (row as f64 + 0.5) / rows as f64 - 1.0;
    [1.0, u, v, u * u, u * v, v * v]
}

impl PerturbationField {
    /// Field value at the center of pixel `(row, col)` of a `rows x cols` image.
    pub fn eval(&self, row: usize, col: usize, rows: usize, cols: usize) -> (f64, f64) {
        match self {
            PerturbationField::Constant { px, py } => (*px, *py),
            PerturbationField::Smooth { x_coeffs, y_coeffs } => {
                let t = smooth_terms(row, col, rows, cols);
                let dot = |k: &[f64; 6]| k.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>();
                (dot(x_coeffs), dot(y_coeffs))
            }
        }
    }

    pub fn max_amplitude(&self, rows: usize, cols: usize) -> f64 {
        let mut m = 0.0f64;
        for r in 0..rows {
            for c in 0..cols {
                let (x, y) = self.eval(r, c, rows, cols);
                m = m.max(x.hypot(y));
            }
        }
        m
    }

    fn is_finite(&self) -> bool {
        match self {
            PerturbationField::Constant { px, py } => px.is_finite() && py.is_finite(),
            PerturbationField::Smooth { x_coeffs, y_coeffs } => {
                x_coeffs.iter().chain(y_coeffs).all(|v| v.is_finite())
            }
        }
    }

    /// Seeded random quadratic field whose largest pixel amplitude equals
    /// `max_amplitude`. Coefficients are normal with standard deviations
    /// [`SMOOTH_TERM_WEIGHTS`], so the constant term dominates.
    pub fn random_smooth(seed: u64, rows: usize, cols: usize, max_amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut x_coeffs = [0.0; 6];
        let mut y_coeffs = [0.0; 6];
        for k in 0..6 {
            x_coeffs[k] = unit.sample(&mut rng) * SMOOTH_TERM_WEIGHTS[k];
            y_coeffs[k] = unit.sample(&mut rng) * SMOOTH_TERM_WEIGHTS[k];
        }
        let raw = PerturbationField::Smooth { x_coeffs, y_coeffs };
        let peak = raw.max_amplitude(rows, cols);
        let s = if peak > 0.0 {
            max_amplitude / peak
        } else {
            0.0
        };
        for k in 0..6 {
            x_coeffs[k] *= s;
            y_coeffs[k] *= s;
        }
        PerturbationField::Smooth { x_coeffs, y_coeffs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// Declarative synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub config: CameraConfig,
    pub background: ScenePatch,
    #[serde(default)]
    pub patches: Vec<ScenePatch>,
    #[serde(default)]
    pub tags: Vec<SceneTag>,
    pub amplitude_scale: f64,
    #[serde(default)]
    pub perturbation: PerturbationField,
    #[serde(default = "NoiseSpec::none")]
    pub noise: NoiseSpec,
    /// Upper bound on the perturbation amplitude relative to the mean truth amplitude.
    #[serde(default = "default_max_fraction")]
    pub max_perturbation_fraction: f64,
}

fn default_max_fraction() -> f64 {
    DEFAULT_MAX_PERTURBATION_FRACTION
}

/// Parses and validates a JSON scene.
pub fn parse_scene(json: &str) -> Result<SceneSpec, SceneError> {
    let scene: SceneSpec = serde_json::from_str(json).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scene.validate()?;
    Ok(scene)
}

fn check_surface(
    field: &str,
    distance_m: f64,
    reflectivity: f64,
    range: f64,
) -> Result<(), SceneError> {
    if !(distance_m.is_finite() && distance_m > 0.0 && distance_m < range) {
        return Err(invalid(
            field,
            format!("distance {distance_m} m outside (0, {range}) m"),
        ));
    }
    if !(reflectivity.is_finite() && reflectivity > 0.0 && reflectivity <= 1.0) {
        return Err(invalid(
            field,
            format!("reflectivity {reflectivity} outside (0, 1]"),
        ));
    }
    Ok(())
}

fn check_region(
    field: &str,
    region: &RectRegion,
    rows: usize,
    cols: usize,
) -> Result<(), SceneError> {
    region
        .check_bounds(rows, cols)
        .map_err(|e| invalid(field, e.to_string()))
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let (rows, cols) = self.config.dims();
        let range = self.config.non_ambiguity_range();
        let full = RectRegion {
            row0: 0,
            col0: 0,
            rows,
            cols,
        };
        if self.background.region != full {
            return Err(invalid(
                "background.region",
                format!("must cover the full frame {full}"),
            ));
        }
        check_surface(
            "background",
            self.background.distance_m,
            self.background.reflectivity,
            range,
        )?;
        for (i, p) in self.patches.iter().enumerate() {
            let field = format!("patches[{i}]");
            check_region(&field, &p.region, rows, cols)?;
            check_surface(&field, p.distance_m, p.reflectivity, range)?;
        }
        for (i, t) in self.tags.iter().enumerate() {
            let field = format!("tags[{i}]");
            check_region(&format!("{field}.white"), &t.white, rows, cols)?;
            check_region(&format!("{field}.black"), &t.black, rows, cols)?;
            if t.white.overlaps(&t.black) {
                return Err(invalid(&field, "white and black regions overlap"));
            }
            check_surface(
                &format!("{field}.white"),
                t.distance_m,
                t.white_reflectivity,
                range,
            )?;
            check_surface(
                &format!("{field}.black"),
                t.distance_m,
                t.black_reflectivity,
                range,
            )?;
            if t.white_reflectivity <= t.black_reflectivity {
                return Err(invalid(
                    &field,
                    "white reflectivity must exceed black reflectivity",
                ));
            }
        }
        if !(self.amplitude_scale.is_finite() && self.amplitude_scale > 0.0) {
            return Err(invalid("amplitude_scale", "must be positive"));
        }
        if !self.perturbation.is_finite() {
            return Err(invalid("perturbation", "coefficients must be finite"));
        }
        if !(self.noise.sigma.is_finite() && self.noise.sigma >= 0.0) {
            return Err(invalid("noise.sigma", "must be finite and >= 0"));
        }
        let fraction = self.max_perturbation_fraction;
        if !(fraction.is_finite() && fraction > 0.0) {
            return Err(invalid("max_perturbation_fraction", "must be positive"));
        }
        let peak = self.perturbation.max_amplitude(rows, cols);
        let limit = fraction * self.mean_truth_amplitude();
        if peak >= limit {
            return Err(invalid(
                "perturbation",
                format!("peak amplitude {peak} must stay below {fraction} x mean scene amplitude = {limit}"),
            ));
        }
        Ok(())
    }

    /// `(distance_m, reflectivity)` of the topmost surface at every pixel.
    pub fn surface_maps(&self) -> (Raster<f64>, Raster<f64>) {
        let (rows, cols) = self.config.dims();
        let mut distance = Raster::filled(rows, cols, self.background.distance_m);
        let mut refl = Raster::filled(rows, cols, self.background.reflectivity);
        for p in &self.patches {
            for (r, c) in p.region.pixels() {
                distance.set(r, c, p.distance_m);
                refl.set(r, c, p.reflectivity);
            }
        }
        for t in &self.tags {
            for (region, rho) in [
                (&t.white, t.white_reflectivity),
                (&t.black, t.black_reflectivity),
            ] {
                for (r, c) in region.pixels() {
                    distance.set(r, c, t.distance_m);
                    refl.set(r, c, rho);
                }
            }
        }
        (distance, refl)
    }

    /// True distance per pixel, exactly as declared.
    pub fn distance_map(&self) -> Raster<f64> {
        self.surface_maps().0
    }

    pub fn mean_truth_amplitude(&self) -> f64 {
        let (_, refl) = self.surface_maps();
        self.amplitude_scale * refl.iter().sum::<f64>() / refl.len() as f64
    }

    pub fn tag_observations(&self) -> Vec<TagObservation> {
        self.tags.iter().map(SceneTag::observation).collect()
    }
}

/// Renders the unperturbed scene.
pub fn render_truth(scene: &SceneSpec) -> Result<(VectorImage, PolarImage), SceneError> {
    scene.validate()?;
    let cfg = scene.config;
    let (distance, refl) = scene.surface_maps();
    let (rows, cols) = cfg.dims();
    let mut ix = Vec::with_capacity(rows * cols);
    let mut iy = Vec::with_capacity(rows * cols);
    for (&d, &rho) in distance.iter().zip(refl.iter()) {
        let a = scene.amplitude_scale * rho;
        let phi = cfg.distance_to_phase(d);
        ix.push(a * phi.cos());
        iy.push(a * phi.sin());
    }
    let v = VectorImage::new(
        cfg,
        Raster::from_vec(rows, cols, ix).expect("shape"),
        Raster::from_vec(rows, cols, iy).expect("shape"),
    )
    .map_err(|e| invalid("scene", e.to_string()))?;
    let p = vector_to_polar(&v);
    Ok((v, p))
}

/// Adds the field and seeded Gaussian noise to every pixel.
pub fn perturb(
    v: &VectorImage,
    field: &PerturbationField,
    noise: &NoiseSpec,
) -> Result<VectorImage, SceneError> {
    if !field.is_finite() {
        return Err(invalid("perturbation", "coefficients must be finite"));
    }
    if !(noise.sigma.is_finite() && noise.sigma >= 0.0) {
        return Err(invalid("noise.sigma", "must be finite and >= 0"));
    }
    let (rows, cols) = v.dims();
    let mut ix = v.ix().clone();
    let mut iy = v.iy().clone();
    for r in 0..rows {
        for c in 0..cols {
            let (px, py) = field.eval(r, c, rows, cols);
            let i = ix.index(r, c);
            ix.as_mut_slice()[i] += px;
            iy.as_mut_slice()[i] += py;
        }
    }
    if noise.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.sigma).expect("sigma checked");
        for (x, y) in ix
            .as_mut_slice()
            .iter_mut()
            .zip(iy.as_mut_slice().iter_mut())
        {
            *x += normal.sample(&mut rng);
            *y += normal.sample(&mut rng);
        }
    }
    VectorImage::new(*v.config(), ix, iy)
        .and_then(|out| out.with_invalid(v.invalid()))
        .map_err(|e| invalid("perturbation", e.to_string()))
}

/// Raw samples split symmetrically around `offset`:
/// `s1 = offset + iy/2`, `s3 = offset - iy/2`, `s2 = offset + ix/2`, `s4 = offset - ix/2`.
pub fn synth_raw(v: &VectorImage, offset: f64) -> Result<RawFrame, SceneError> {
    let (rows, cols) = v.dims();
    let n = rows * cols;
    let mut s = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for (i, (&x, &y)) in v.ix().iter().zip(v.iy().iter()).enumerate() {
        let samples = [
            offset + y / 2.0,
            offset + x / 2.0,
            offset - y / 2.0,
            offset - x / 2.0,
        ];
        if samples.iter().any(|&q| q.is_nan() || q < 0.0) {
            return Err(SceneError::NegativeSample {
                row: i / cols,
                col: i % cols,
                offset,
            });
        }
        for (dst, q) in s.iter_mut().zip(samples) {
            dst.push(q);
        }
    }
    let [s1, s2, s3, s4] = s.map(|d| Raster::from_vec(rows, cols, d).expect("shape"));
    RawFrame::new(s1, s2, s3, s4).map_err(|e| invalid("raw", e.to_string()))
}

/// Smallest offset for which [`synth_raw`] yields non-negative samples.
pub fn min_raw_offset(v: &VectorImage) -> f64 {
    v.ix()
        .iter()
        .chain(v.iy().iter())
        .fold(0.0f64, |m, &x| m.max(x.abs() / 2.0))
}

/// Truth and perturbed capture of one scene.
#[derive(Debug, Clone)]
pub struct Capture {
    pub truth_vector: VectorImage,
    pub truth: PolarImage,
    pub vector: VectorImage,
    pub polar: PolarImage,
}

pub fn capture(scene: &SceneSpec) -> Result<Capture, SceneError> {
    let (truth_vector, truth) = render_truth(scene)?;
    let vector = perturb(&truth_vector, &scene.perturbation, &scene.noise)?;
    let polar = vector_to_polar(&vector);
    Ok(Capture {
        truth_vector,
        truth,
        vector,
        polar,
    })
}
