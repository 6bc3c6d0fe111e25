use std::fs;
use std::path::Path;
use std::time::Duration;

use serde_json::json;
use tofcorr::correction::{measure_tags, PipelineOptions, SegmentRule};
use tofcorr::io::{
    encode_mask, read_tofc, render_view, write_atomic, write_report, write_tofc, FormatError,
    TofcImage,
};
use tofcorr::model::pixel_to_polar;
use tofcorr::simulator::{capture, min_raw_offset, parse_scene, synth_raw};
use tofcorr::{
    correct_pipeline, depth_difference, region_mean, segment_by_distance, CorrectionError,
    CorrectionReport, PolarImage,
};

use crate::args::{
    tag_from_zones, CaptureKind, CorrectArgs, DiffArgs, ExportArgs, SegmentArgs, ServeArgs,
    SimulateArgs, StatsArgs, Zone,
};

pub const EXIT_FILE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_GATE: u8 = 3;
pub const EXIT_DEGENERATE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn file(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_FILE,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

fn correction_exit(e: &CorrectionError) -> u8 {
    match e {
        CorrectionError::Implausible(_) => EXIT_GATE,
        e if e.is_degenerate() => EXIT_DEGENERATE,
        _ => EXIT_INVALID,
    }
}

fn load_polar(path: &Path) -> Result<PolarImage, CliError> {
    read_tofc(path)
        .map_err(|e| CliError::file(path, e))?
        .to_polar()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn save(img: &TofcImage, path: &Path) -> Result<(), CliError> {
    write_tofc(img, path).map_err(|e| CliError::file(path, e))
}

fn save_bytes(bytes: &[u8], path: &Path) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::file(path, e))
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("plain data serializes")
    );
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.scene).map_err(|e| CliError::file(&a.scene, e))?;
    let mut scene =
        parse_scene(&text).map_err(|e| CliError::invalid(format!("{}: {e}", a.scene.display())))?;
    if let Some(seed) = a.seed {
        scene.noise.seed = seed;
    }
    let cap = capture(&scene).map_err(|e| CliError::invalid(e.to_string()))?;
    let img = match a.kind {
        CaptureKind::Vector => TofcImage::Vector(cap.vector),
        CaptureKind::Polar => TofcImage::Polar(cap.polar),
        CaptureKind::Raw => {
            let offset = 2.0 * min_raw_offset(&cap.vector);
            let frame =
                synth_raw(&cap.vector, offset).map_err(|e| CliError::invalid(e.to_string()))?;
            TofcImage::Raw(frame, scene.config)
        }
    };
    save(&img, &a.out)?;
    if let Some(truth) = &a.truth {
        save(&TofcImage::Polar(cap.truth), truth)?;
    }
    Ok(())
}

pub fn correct(a: CorrectArgs) -> Result<(), CliError> {
    let tags = a.tags().map_err(CliError::invalid)?;
    let options = PipelineOptions {
        ratio: a.ratio,
        force: a.force,
        segment: a.segment_mm.map(|mm| SegmentRule::from_mm(mm, a.relation)),
        ..PipelineOptions::default()
    };
    let p = match load_polar(&a.input) {
        Ok(p) => p,
        Err(e) => {
            let report = CorrectionReport {
                method: None,
                correction: None,
                plausibility: None,
                tags: Vec::new(),
                segment: None,
                applied: false,
                forced: false,
                warnings: Vec::new(),
                error: Some(e.message.clone()),
            };
            write_report(&report, &a.report).map_err(|e| CliError::file(&a.report, e))?;
            return Err(e);
        }
    };
    let outcome = correct_pipeline(&p, &tags, &options);
    let report = match &outcome {
        Ok(out) => out.report.clone(),
        Err(CorrectionError::Implausible(r)) => (**r).clone(),
        Err(e) => CorrectionReport::failure(measure_tags(&p.to_vector(), &tags), e),
    };
    write_report(&report, &a.report).map_err(|e| CliError::file(&a.report, e))?;
    let out = outcome.map_err(|e| CliError {
        code: correction_exit(&e),
        message: e.to_string(),
    })?;
    save(&TofcImage::Polar(out.corrected), &a.out)?;

    let c = &out.correction;
    println!("method {}", c.method);
    println!("correction ({}, {})", c.icx, c.icy);
    if let Some(d) = &report.plausibility {
        println!("plausibility {d}");
    }
    for t in &report.tags {
        if let (Some(before), Some(after)) = (t.discrepancy_before_mm(), t.discrepancy_after_mm()) {
            println!(
                "{}: discrepancy {} mm -> {} mm",
                t.label,
                mm(before),
                mm(after)
            );
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.forced {
        eprintln!("warning: applied despite the plausibility gate (--force)");
    }
    Ok(())
}

pub fn segment(a: SegmentArgs) -> Result<(), CliError> {
    let p = load_polar(&a.input)?;
    let mask = segment_by_distance(&p, a.threshold_mm / 1000.0, a.relation)
        .map_err(|e| CliError::invalid(e.to_string()))?;
    save_bytes(&encode_mask(&mask.mask), &a.out)?;
    println!(
        "{} pixels {} {} mm",
        mask.count(),
        mask.relation,
        a.threshold_mm
    );
    Ok(())
}

/// Millimeters at one decimal; rounding never yields "-0.0".
fn mm(x: f64) -> String {
    let s = format!("{x:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

fn distance_mm(p: &PolarImage, ix: f64, iy: f64) -> (f64, f64) {
    let (amp, d) = pixel_to_polar(ix, iy, p.config());
    (amp, d * 1000.0)
}

pub fn stats(a: StatsArgs) -> Result<(), CliError> {
    let tags = a
        .tag
        .chunks(2)
        .enumerate()
        .map(|(i, z): (usize, &[Zone])| tag_from_zones(z, tofcorr_service::default_tag_label(i)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::invalid)?;
    let p = load_polar(&a.input)?;
    let v = p.to_vector();
    let invalid = |e: CorrectionError| CliError::invalid(e.to_string());

    let mut regions = Vec::new();
    for r in &a.region {
        let s = region_mean(&v, r).map_err(invalid)?;
        let (amp, mm) = distance_mm(&p, s.mean_ix, s.mean_iy);
        regions.push((r, s, amp, mm));
    }
    let mut tag_rows = Vec::new();
    for t in &tags {
        let w = region_mean(&v, &t.white).map_err(invalid)?;
        let b = region_mean(&v, &t.black).map_err(invalid)?;
        let (_, w_mm) = distance_mm(&p, w.mean_ix, w.mean_iy);
        let (_, b_mm) = distance_mm(&p, b.mean_ix, b.mean_iy);
        tag_rows.push((t, w_mm, b_mm));
    }

    if a.json {
        print_json(&json!({
            "regions": regions.iter().map(|(r, s, amp, mm)| json!({
                "region": r.to_string(),
                "pixels": s.pixel_count,
                "mean_ix": s.mean_ix,
                "mean_iy": s.mean_iy,
                "amplitude": amp,
                "distance_mm": mm,
            })).collect::<Vec<_>>(),
            "tags": tag_rows.iter().map(|(t, w, b)| json!({
                "label": t.label,
                "white_mm": w,
                "black_mm": b,
                "discrepancy_mm": w - b,
            })).collect::<Vec<_>>(),
        }));
        return Ok(());
    }
    for (r, s, amp, d_mm) in &regions {
        println!(
            "region {r}: {} px, mean ({}, {}), amplitude {amp}, distance {} mm",
            s.pixel_count,
            s.mean_ix,
            s.mean_iy,
            mm(*d_mm)
        );
    }
    for (t, w, b) in &tag_rows {
        println!(
            "{}: white {} mm, black {} mm, discrepancy {} mm",
            t.label,
            mm(*w),
            mm(*b),
            mm(w - b)
        );
    }
    Ok(())
}

pub fn diff(a: DiffArgs) -> Result<(), CliError> {
    let pa = load_polar(&a.a)?;
    let pb = load_polar(&a.b)?;
    let d = depth_difference(&pa, &pb, None).map_err(|e| CliError::invalid(e.to_string()))?;
    if a.json {
        print_json(&serde_json::to_value(d).expect("plain data serializes"));
    } else {
        println!("pixels {}", d.pixels);
        println!("rmse {} mm", mm(d.rmse_m * 1000.0));
        println!("max {} mm", mm(d.max_abs_m * 1000.0));
    }
    Ok(())
}

pub fn export(a: ExportArgs) -> Result<(), CliError> {
    let p = load_polar(&a.input)?;
    let bytes = render_view(&p, a.kind, a.min, a.max).map_err(|e| match e {
        FormatError::Io(e) => CliError::file(&a.out, e),
        e => CliError::invalid(e.to_string()),
    })?;
    save_bytes(&bytes, &a.out)
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError {
        code: EXIT_FILE,
        message: e.to_string(),
    })?;
    runtime
        .block_on(tofcorr_service::serve(a.bind, Duration::from_secs(a.ttl)))
        .map_err(|e| CliError {
            code: EXIT_FILE,
            message: format!("{}: {e}", a.bind),
        })
}
