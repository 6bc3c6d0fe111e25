mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Command, Stdio};

use axum::http::StatusCode;
use serde_json::{json, Value};
use tempfile::tempdir;
use tofcorr::io::{encode_mask, read_report, read_tofc, render_view, ViewKind};
use tofcorr::simulator::fixtures::{
    narrative_tag_scene, two_plane_scene, two_plane_scene_with_constant,
};
use tofcorr::simulator::{parse_scene, NoiseSpec, PerturbationField, SceneSpec};
use tofcorr::{segment_by_distance, DepthDiff, Method, Relation};

use common::*;

fn noisy_scene() -> SceneSpec {
    let mut s = two_plane_scene_with_constant(0.05, 3.3);
    s.noise = NoiseSpec {
        sigma: 2.0,
        seed: 11,
    };
    s
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempdir().unwrap();
    let scene = write_scene(dir.path(), "s.json", &noisy_scene());
    let run = |name: &str, seed: Option<&str>| {
        let out_path = dir.path().join(name);
        let mut args = vec![
            "simulate".to_string(),
            "--scene".into(),
            path_str(&scene).into(),
            "--out".into(),
            path_str(&out_path).into(),
        ];
        if let Some(s) = seed {
            args.extend(["--seed".into(), s.into()]);
        }
        let out = tofcorr(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(out_path).unwrap()
    };
    let a = run("a.tofc", None);
    assert_eq!(a, run("b.tofc", None));
    assert_eq!(a, run("c.tofc", Some("11")));
    assert_ne!(a, run("d.tofc", Some("12")));
}

#[test]
fn simulate_writes_every_kind() {
    let dir = tempdir().unwrap();
    let scene = write_scene(
        dir.path(),
        "s.json",
        &two_plane_scene_with_constant(0.05, 3.3),
    );
    let mut polars = Vec::new();
    for kind in ["vector", "polar", "raw"] {
        let path = dir.path().join(format!("{kind}.tofc"));
        let out = tofcorr([
            "simulate",
            "--scene",
            path_str(&scene),
            "--out",
            path_str(&path),
            "--kind",
            kind,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let img = read_tofc(&path).unwrap();
        assert_eq!(
            img.kind() as u16,
            ["vector", "polar", "raw"]
                .iter()
                .position(|k| *k == kind)
                .unwrap() as u16
                + 1
        );
        polars.push(img.to_polar().unwrap());
    }
    // f32 storage of each kind rounds differently; the depths agree to well under a micron
    for p in &polars[1..] {
        for (a, b) in p.distance().iter().zip(polars[0].distance().iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn simulate_rejects_bad_scenes_with_location() {
    let dir = tempdir().unwrap();
    let mut scene = two_plane_scene();
    scene.patches[1].region.col0 = 60;
    let path = write_scene(dir.path(), "bad.json", &scene);
    let out_path = dir.path().join("x.tofc");
    let out = tofcorr([
        "simulate",
        "--scene",
        path_str(&path),
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("patches[1]"), "{}", stderr(&out));
    assert!(!out_path.exists());

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"config\": [\n}").unwrap();
    let out = tofcorr([
        "simulate",
        "--scene",
        path_str(&broken),
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let missing = dir.path().join("missing.json");
    let out = tofcorr([
        "simulate",
        "--scene",
        path_str(&missing),
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(code(&out), 1);
}

fn correct_args<'a>(input: &'a str, out: &'a str, report: &'a str, two_tags: bool) -> Vec<&'a str> {
    let mut args = vec![
        "correct", "--in", input, "--out", out, "--report", report, "--tag", NEAR_WHITE, NEAR_BLACK,
    ];
    if two_tags {
        args.extend(["--tag2", FAR_WHITE, FAR_BLACK]);
    }
    args
}

#[test]
fn correct_recovers_injected_constant() {
    let dir = tempdir().unwrap();
    let scene = two_plane_scene_with_constant(0.05, 3.3);
    let PerturbationField::Constant { px, py } = scene.perturbation else {
        unreachable!()
    };
    let (capture, truth) = simulate(dir.path(), "c", &scene);
    let out_path = dir.path().join("out.tofc");
    let report_path = dir.path().join("r.json");
    let out = tofcorr(correct_args(
        path_str(&capture),
        path_str(&out_path),
        path_str(&report_path),
        true,
    ));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_report(&report_path).unwrap();
    assert!(report.applied && !report.forced);
    assert_eq!(report.method, Some(Method::TwoTag));
    let c = report.correction.unwrap();
    // the capture went through f32, so closure holds to f32 precision here
    let err = (c.icx - px).hypot(c.icy - py) / px.hypot(py);
    assert!(err < 1e-4, "relative error {err}");
    assert!(stdout(&out).contains("method two-tag"), "{}", stdout(&out));

    let diff = |a: &std::path::Path| -> DepthDiff {
        let out = tofcorr(["diff", path_str(a), path_str(&truth), "--json"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let before = diff(&capture);
    let after = diff(&out_path);
    assert!(
        after.rmse_m < 1e-3 * before.rmse_m,
        "{after:?} vs {before:?}"
    );
    assert!(after.max_abs_m < 1e-4);
}

#[test]
fn correct_undistorted_exits_4() {
    let dir = tempdir().unwrap();
    let (capture, _) = simulate(dir.path(), "u", &two_plane_scene());
    let out_path = dir.path().join("out.tofc");
    let report_path = dir.path().join("r.json");
    let out = tofcorr(correct_args(
        path_str(&capture),
        path_str(&out_path),
        path_str(&report_path),
        false,
    ));
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("tag already consistent"));
    assert!(!out_path.exists());
    let report = read_report(&report_path).unwrap();
    assert!(!report.applied);
    assert!(report.error.unwrap().contains("tag already consistent"));
    assert_eq!(report.tags.len(), 1);
    assert!(report.tags[0].white_before_mm.is_some());
}

#[test]
fn correct_same_tag_twice_is_degenerate() {
    let dir = tempdir().unwrap();
    let (capture, _) = simulate(dir.path(), "c", &two_plane_scene_with_constant(0.05, 3.3));
    let out_path = dir.path().join("out.tofc");
    let report_path = dir.path().join("r.json");
    let out = tofcorr([
        "correct",
        "--in",
        path_str(&capture),
        "--out",
        path_str(&out_path),
        "--report",
        path_str(&report_path),
        "--tag",
        NEAR_WHITE,
        NEAR_BLACK,
        "--tag",
        NEAR_WHITE,
        NEAR_BLACK,
    ]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("degenerate tag geometry"));
    assert!(!out_path.exists());
}

#[test]
fn gate_refuses_then_force_applies() {
    let dir = tempdir().unwrap();
    let (capture, _) = simulate(dir.path(), "g", &two_plane_scene_with_constant(0.6, 3.3));
    let out_path = dir.path().join("out.tofc");
    let report_path = dir.path().join("r.json");
    let mut args = correct_args(
        path_str(&capture),
        path_str(&out_path),
        path_str(&report_path),
        true,
    );
    let out = tofcorr(&args);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("plausibility"), "{}", stderr(&out));
    assert!(!out_path.exists());
    let report = read_report(&report_path).unwrap();
    let d = report.plausibility.unwrap();
    assert!(!d.passed && !report.applied);
    assert!(d.correction_amplitude >= d.threshold);
    assert_eq!(d.threshold, d.ratio * d.mean_amplitude);

    args.push("--force");
    let out = tofcorr(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out_path.exists());
    let report = read_report(&report_path).unwrap();
    assert!(report.applied && report.forced);
    assert!(!report.plausibility.unwrap().passed);
}

#[test]
fn flags_are_validated_before_io() {
    let dir = tempdir().unwrap();
    let report_path = dir.path().join("r.json");
    let out_path = dir.path().join("out.tofc");
    let missing = dir.path().join("missing.tofc");
    for bad in [
        vec!["--tag", "1,2,3", NEAR_BLACK],
        vec!["--tag", NEAR_WHITE, NEAR_BLACK, "--ratio", "-1"],
        vec!["--tag", "W:24,13,8,6", "W:24,19,8,6"],
        vec!["--tag", "24,13,8,6", "24,15,8,6"],
        vec![
            "--tag", NEAR_WHITE, NEAR_BLACK, "--tag", FAR_WHITE, FAR_BLACK, "--tag2", NEAR_WHITE,
            NEAR_BLACK,
        ],
    ] {
        let mut args = vec![
            "correct",
            "--in",
            path_str(&missing),
            "--out",
            path_str(&out_path),
            "--report",
            path_str(&report_path),
        ];
        args.extend(bad.iter().copied());
        let out = tofcorr(&args);
        assert_eq!(code(&out), 2, "{bad:?}: {}", stderr(&out));
        assert!(!report_path.exists(), "{bad:?}");
    }

    let mut args = correct_args(
        path_str(&missing),
        path_str(&out_path),
        path_str(&report_path),
        false,
    );
    let out = tofcorr(&args);
    assert_eq!(code(&out), 1);
    assert!(read_report(&report_path).unwrap().error.is_some());

    // prefixed zones may come in either order
    let (capture, _) = simulate(dir.path(), "c", &two_plane_scene_with_constant(0.05, 3.3));
    args[2] = path_str(&capture);
    let plain = tofcorr(&args);
    let plain_bytes = fs::read(&out_path).unwrap();
    let swapped: Vec<String> = args
        .iter()
        .map(|a| match *a {
            NEAR_WHITE => format!("B:{NEAR_BLACK}"),
            NEAR_BLACK => format!("W:{NEAR_WHITE}"),
            a => a.to_string(),
        })
        .collect();
    let out = tofcorr(&swapped);
    assert_eq!(code(&plain), 0);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&out_path).unwrap(), plain_bytes);

    let out = tofcorr(["correct", "--in", path_str(&capture)]);
    assert_eq!(code(&out), 2);
    let out = tofcorr(["frobnicate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn out_of_bounds_tag_writes_report_and_exits_2() {
    let dir = tempdir().unwrap();
    let (capture, _) = simulate(dir.path(), "c", &two_plane_scene_with_constant(0.05, 3.3));
    let report_path = dir.path().join("r.json");
    let out = tofcorr([
        "correct",
        "--in",
        path_str(&capture),
        "--out",
        path_str(&dir.path().join("o.tofc")),
        "--report",
        path_str(&report_path),
        "--tag",
        "60,60,8,8",
        NEAR_BLACK,
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("exceeds"), "{}", stderr(&out));
    assert!(read_report(&report_path)
        .unwrap()
        .error
        .unwrap()
        .contains("exceeds"));
}

#[test]
fn stats_prints_tag_discrepancy() {
    let dir = tempdir().unwrap();
    let scene = narrative_tag_scene();
    let tag = &scene.tags[0];
    let (capture, _) = simulate(dir.path(), "n", &scene);
    let out = tofcorr([
        "stats",
        "--in",
        path_str(&capture),
        "--tag",
        &tag.white.to_string(),
        &tag.black.to_string(),
        "--region",
        "0,0,4,4",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("tag1: white 1760.0 mm, black 1400.0 mm, discrepancy 360.0 mm"),
        "{text}"
    );
    assert!(text.contains("region 0,0,4,4: 16 px"), "{text}");

    let out = tofcorr([
        "stats",
        "--in",
        path_str(&capture),
        "--tag",
        &tag.white.to_string(),
        &tag.black.to_string(),
        "--json",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = v["tags"][0]["discrepancy_mm"].as_f64().unwrap();
    assert!((d - 360.0).abs() < 1e-3, "{d}");

    let out = tofcorr([
        "stats",
        "--in",
        path_str(&capture),
        "--region",
        "40,40,10,10",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn diff_of_file_with_itself_is_zero() {
    let dir = tempdir().unwrap();
    let (capture, _) = simulate(dir.path(), "c", &noisy_scene());
    let out = tofcorr(["diff", path_str(&capture), path_str(&capture)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "pixels 4096\nrmse 0.0 mm\nmax 0.0 mm\n");

    let (other, _) = simulate(dir.path(), "n", &narrative_tag_scene());
    let out = tofcorr(["diff", path_str(&capture), path_str(&other)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("48x48"), "{}", stderr(&out));
}

#[test]
fn segment_and_export_match_library_and_service() {
    let dir = tempdir().unwrap();
    let (capture, _) = simulate(dir.path(), "c", &two_plane_scene_with_constant(0.05, 3.3));
    let p = read_tofc(&capture).unwrap().to_polar().unwrap();
    let bytes = fs::read(&capture).unwrap();

    let mask_path = dir.path().join("m.pgm");
    let out = tofcorr([
        "segment",
        "--in",
        path_str(&capture),
        "--threshold-mm",
        "1500",
        "--out",
        path_str(&mask_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mask = segment_by_distance(&p, 1.5, Relation::CloserThan).unwrap();
    let cli_mask = fs::read(&mask_path).unwrap();
    assert_eq!(cli_mask, encode_mask(&mask.mask));
    assert!(stdout(&out).starts_with(&format!("{} pixels", mask.count())));

    let view_path = dir.path().join("v.pgm");
    let out = tofcorr([
        "export",
        "--in",
        path_str(&capture),
        "--kind",
        "amplitude",
        "--min",
        "-5",
        "--max",
        "900",
        "--out",
        path_str(&view_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cli_view = fs::read(&view_path).unwrap();
    assert_eq!(
        cli_view,
        render_view(&p, ViewKind::Amplitude, Some(-5.0), Some(900.0)).unwrap()
    );

    let out = tofcorr([
        "export",
        "--in",
        path_str(&capture),
        "--min",
        "10",
        "--max",
        "10",
        "--out",
        path_str(&view_path),
    ]);
    assert_eq!(code(&out), 2);

    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let app = app();
        let id = open(&app, bytes).await;
        let (status, api_mask) = send(
            &app,
            "GET",
            &format!("/sessions/{id}/segment?threshold_mm=1500&relation=closer-than"),
            vec![],
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(api_mask, cli_mask);
        let (_, api_view) = send(
            &app,
            "GET",
            &format!("/sessions/{id}/image?kind=amplitude&min=-5&max=900"),
            vec![],
        )
        .await;
        assert_eq!(api_view, cli_view);
    });
}

#[test]
fn cli_sequence_matches_api_sequence() {
    let dir = tempdir().unwrap();
    let (capture, _) = simulate(dir.path(), "c", &two_plane_scene_with_constant(0.05, 3.3));
    let step1 = dir.path().join("s1.tofc");
    let step2 = dir.path().join("s2.tofc");
    let report1 = dir.path().join("r1.json");
    let report2 = dir.path().join("r2.json");
    let out = tofcorr([
        "correct",
        "--in",
        path_str(&capture),
        "--out",
        path_str(&step1),
        "--report",
        path_str(&report1),
        "--tag",
        FAR_WHITE,
        FAR_BLACK,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = tofcorr([
        "correct",
        "--in",
        path_str(&step1),
        "--out",
        path_str(&step2),
        "--report",
        path_str(&report2),
        "--tag",
        NEAR_WHITE,
        NEAR_BLACK,
        "--segment-mm",
        "1500",
        "--relation",
        "closer-than",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let rt = tokio::runtime::Runtime::new().unwrap();
    let (api_reports, exported) = rt.block_on(async {
        let app = app();
        let id = open(&app, fs::read(&capture).unwrap()).await;
        let uri = format!("/sessions/{id}/correct");
        let bodies = [
            json!({ "tags": [{ "white": FAR_WHITE, "black": FAR_BLACK }] }),
            json!({
                "tags": [{ "white": NEAR_WHITE, "black": NEAR_BLACK }],
                "segment": { "threshold_mm": 1500.0, "relation": "closer-than" }
            }),
        ];
        let mut reports = Vec::new();
        for body in bodies {
            let (status, bytes) = send(&app, "POST", &uri, body.to_string().into_bytes()).await;
            assert_eq!(
                status,
                StatusCode::OK,
                "{}",
                String::from_utf8_lossy(&bytes)
            );
            reports.push(serde_json::from_slice::<Value>(&bytes).unwrap());
        }
        let (_, exported) = send(&app, "GET", &format!("/sessions/{id}/export"), vec![]).await;
        (reports, exported)
    });
    assert_eq!(exported, fs::read(&step2).unwrap());
    for (api, path) in api_reports.iter().zip([&report1, &report2]) {
        let cli: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(api, &cli);
    }
}

#[test]
fn serve_answers_http() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_tofcorr"))
        .args(["serve", "--bind", "127.0.0.1:0", "--ttl", "60"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().rsplit("http://").next().unwrap().to_string();
    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(
        stream,
        "GET /sessions/nope HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 404"), "{resp}");
    assert!(resp.contains("\"error\""), "{resp}");
}

#[test]
fn shipped_scenes_match_fixtures() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes");
    let shipped = [
        ("two_plane.json", two_plane_scene_with_constant(0.05, 3.3)),
        ("narrative_tag.json", narrative_tag_scene()),
        ("oversized.json", two_plane_scene_with_constant(0.6, 3.3)),
        ("undistorted.json", two_plane_scene()),
    ];
    for (name, scene) in shipped {
        let path = dir.join(name);
        if std::env::var_os("TOFCORR_WRITE_SCENES").is_some() {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, serde_json::to_string_pretty(&scene).unwrap() + "\n").unwrap();
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(parse_scene(&text).unwrap(), scene, "{name}");
    }
}
