#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tofcorr::simulator::SceneSpec;
use tofcorr_service::{router, AppState, SessionInfo, DEFAULT_TTL};
use tower::ServiceExt;

pub const NEAR_WHITE: &str = "24,13,8,6";
pub const NEAR_BLACK: &str = "24,19,8,6";
pub const FAR_WHITE: &str = "24,42,8,6";
pub const FAR_BLACK: &str = "24,48,8,6";

pub fn tofcorr<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_tofcorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn write_scene(dir: &Path, name: &str, scene: &SceneSpec) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(scene).unwrap()).unwrap();
    path
}

/// Simulates `scene` into `<stem>.tofc` and `<stem>_truth.tofc`.
pub fn simulate(dir: &Path, stem: &str, scene: &SceneSpec) -> (PathBuf, PathBuf) {
    let scene_path = write_scene(dir, &format!("{stem}.json"), scene);
    let capture = dir.join(format!("{stem}.tofc"));
    let truth = dir.join(format!("{stem}_truth.tofc"));
    let out = tofcorr([
        "simulate",
        "--scene",
        path_str(&scene_path),
        "--out",
        path_str(&capture),
        "--truth",
        path_str(&truth),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (capture, truth)
}

pub fn app() -> Router {
    router(Arc::new(AppState::new(DEFAULT_TTL)))
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

pub async fn open(app: &Router, bytes: Vec<u8>) -> String {
    let (status, body) = send(app, "POST", "/sessions", bytes).await;
    assert_eq!(status, StatusCode::CREATED);
    let info: SessionInfo = serde_json::from_slice(&body).unwrap();
    info.session_id
}
