//! Reference scenes shared by tests, the acceptance suite and the CLI examples.

use crate::correction::RectRegion;
use crate::model::{CameraConfig, VectorImage, DEFAULT_MOD_FREQ_HZ};
use crate::raster::Raster;

use super::{
    NoiseSpec, PerturbationField, ScenePatch, SceneSpec, SceneTag,
    DEFAULT_MAX_PERTURBATION_FRACTION,
};

pub const NEAR_DISTANCE_M: f64 = 1.2;
pub const FAR_DISTANCE_M: f64 = 2.0;

fn rect(row0: usize, col0: usize, rows: usize, cols: usize) -> RectRegion {
    RectRegion {
        row0,
        col0,
        rows,
        cols,
    }
}

/// Footprint of the near object in [`two_plane_scene`].
pub fn near_object_region() -> RectRegion {
    rect(8, 4, 40, 30)
}

/// 64x64 scene: a wall at 2.0 m with three dark labels, a darker object at
/// 1.2 m, and one contrast tag on each plane. No perturbation.
pub fn two_plane_scene() -> SceneSpec {
    let config = CameraConfig::new(64, 64, DEFAULT_MOD_FREQ_HZ).expect("valid config");
    let wall = |region| ScenePatch {
        region,
        distance_m: FAR_DISTANCE_M,
        reflectivity: 0.08,
    };
    SceneSpec {
        config,
        background: ScenePatch {
            region: rect(0, 0, 64, 64),
            distance_m: FAR_DISTANCE_M,
            reflectivity: 0.8,
        },
        patches: vec![
            ScenePatch {
                region: near_object_region(),
                distance_m: NEAR_DISTANCE_M,
                reflectivity: 0.35,
            },
            wall(rect(4, 40, 6, 8)),
            wall(rect(50, 44, 6, 8)),
            wall(rect(54, 10, 6, 8)),
        ],
        tags: vec![
            SceneTag {
                white: rect(24, 13, 8, 6),
                black: rect(24, 19, 8, 6),
                label: "near".into(),
                distance_m: NEAR_DISTANCE_M,
                white_reflectivity: 0.9,
                black_reflectivity: 0.2,
            },
            SceneTag {
                white: rect(24, 42, 8, 6),
                black: rect(24, 48, 8, 6),
                label: "far".into(),
                distance_m: FAR_DISTANCE_M,
                white_reflectivity: 0.9,
                black_reflectivity: 0.2,
            },
        ],
        amplitude_scale: 1000.0,
        perturbation: PerturbationField::default(),
        noise: NoiseSpec::none(),
        max_perturbation_fraction: DEFAULT_MAX_PERTURBATION_FRACTION,
    }
}

/// [`two_plane_scene`] with a constant perturbation pointing at the phase of
/// `phase_distance_m` whose magnitude is `fraction` of the mean amplitude of the
/// resulting capture (a fixed point, found by iteration).
pub fn two_plane_scene_with_constant(fraction: f64, phase_distance_m: f64) -> SceneSpec {
    let mut scene = two_plane_scene();
    let (truth, _) = super::render_truth(&scene).expect("valid fixture");
    let phi = scene.config.distance_to_phase(phase_distance_m);
    let (ux, uy) = (phi.cos(), phi.sin());
    let captured_mean = |m: f64| {
        let n = truth.ix().len() as f64;
        truth
            .ix()
            .iter()
            .zip(truth.iy().iter())
            .map(|(&x, &y)| (x + m * ux).hypot(y + m * uy))
            .sum::<f64>()
            / n
    };
    // m -> fraction * mean(m) is a contraction for fraction < 1
    let mut m = fraction * scene.mean_truth_amplitude();
    for _ in 0..200 {
        let next = fraction * captured_mean(m);
        let done = (next - m).abs() <= 1e-13 * next;
        m = next;
        if done {
            break;
        }
    }
    scene.perturbation = PerturbationField::Constant {
        px: m * ux,
        py: m * uy,
    };
    scene.max_perturbation_fraction = scene.max_perturbation_fraction.max(fraction * 2.0);
    scene
}

pub const NARRATIVE_TRUE_DISTANCE_M: f64 = 1.9;
pub const NARRATIVE_WHITE_READING_M: f64 = 1.76;
pub const NARRATIVE_BLACK_READING_M: f64 = 1.40;

/// A single tag on a wall whose capture reads 1760 mm on the white half and
/// 1400 mm on the black half.
///
/// The tag truly sits at 1.9 m. A constant perturbation of amplitude 100 with the
/// phase of a 1.0 m return is added, and the two half amplitudes are solved so
/// that `a * u + p` lands on the target phase: `a = -(e x p) / (e x u)`, with `u`
/// the true direction and `e` the target direction.
pub fn narrative_tag_scene() -> SceneSpec {
    let config = CameraConfig::new(48, 48, DEFAULT_MOD_FREQ_HZ).expect("valid config");
    let scale = 1000.0;
    let unit = |d: f64| {
        let phi = config.distance_to_phase(d);
        (phi.cos(), phi.sin())
    };
    let cross = |a: (f64, f64), b: (f64, f64)| a.0 * b.1 - a.1 * b.0;
    let u = unit(NARRATIVE_TRUE_DISTANCE_M);
    let (ex, ey) = unit(1.0);
    let p = (100.0 * ex, 100.0 * ey);
    let amplitude_for = |reading: f64| {
        let e = unit(reading);
        -cross(e, p) / cross(e, u)
    };
    let white = amplitude_for(NARRATIVE_WHITE_READING_M);
    let black = amplitude_for(NARRATIVE_BLACK_READING_M);
    SceneSpec {
        config,
        background: ScenePatch {
            region: rect(0, 0, 48, 48),
            distance_m: NARRATIVE_TRUE_DISTANCE_M,
            reflectivity: 0.8,
        },
        patches: vec![],
        tags: vec![SceneTag {
            white: rect(20, 14, 8, 10),
            black: rect(20, 24, 8, 10),
            label: "tag".into(),
            distance_m: NARRATIVE_TRUE_DISTANCE_M,
            white_reflectivity: white / scale,
            black_reflectivity: black / scale,
        }],
        amplitude_scale: scale,
        perturbation: PerturbationField::Constant { px: p.0, py: p.1 },
        noise: NoiseSpec::none(),
        max_perturbation_fraction: DEFAULT_MAX_PERTURBATION_FRACTION,
    }
}

/// Adds a different constant vector inside each (disjoint) mask.
pub fn piecewise_constant_perturb(
    v: &VectorImage,
    pieces: &[(Raster<bool>, (f64, f64))],
) -> VectorImage {
    let mut ix = v.ix().clone();
    let mut iy = v.iy().clone();
    for (mask, (px, py)) in pieces {
        assert_eq!(mask.dims(), v.dims(), "mask shape");
        for (i, &m) in mask.iter().enumerate() {
            if m {
                ix.as_mut_slice()[i] += px;
                iy.as_mut_slice()[i] += py;
            }
        }
    }
    VectorImage::new(*v.config(), ix, iy)
        .and_then(|out| out.with_invalid(v.invalid()))
        .expect("finite perturbation")
}
