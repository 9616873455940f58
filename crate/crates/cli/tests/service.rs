//! HTTP API, driven in-process through the router.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::http::{header, HeaderMap, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use crossel_cli::run_from;
use crossel_cli::service::{router, AppState, ServiceConfig};

fn scene_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/surface_studio.json")
}

fn scene() -> Value {
    serde_json::from_str(&fs::read_to_string(scene_path()).unwrap()).unwrap()
}

fn app() -> (Arc<AppState>, Router) {
    let state = AppState::new(ServiceConfig::default());
    (state.clone(), router(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, headers: &[(&str, &str)]) -> (StatusCode, HeaderMap, Bytes) {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, headers, bytes)
}

fn json_of(bytes: &Bytes) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn open(app: &Router, body: Value) -> String {
    let (status, _, bytes) = call(app, "POST", "/api/session", Some(body), &[]).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    json_of(&bytes)["id"].as_str().unwrap().to_string()
}

fn run(args: &[&str]) -> i32 {
    run_from(std::iter::once("crossel").chain(args.iter().copied()))
}

/// Generated cluster data, a scripted lasso, and the CLI's selection of it.
struct Artifacts {
    _dir: TempDir,
    cloud: PathBuf,
    trace: Value,
    cli_selection: Value,
    cli_obj: String,
}

fn artifacts() -> Artifacts {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let scene = p(&scene_path());
    let g = d.join("g");
    assert_eq!(
        run(&[
            "gen", "--k", "2", "--n", "1500", "--seed", "11", "--scene", &scene, "--trace-kind", "lasso_around_cluster",
            "-o", &p(&g),
        ]),
        0
    );
    let field = d.join("f.xrdf");
    assert_eq!(run(&["estimate", "--cloud", &p(&g.join("cloud.csv")), "--scene", &scene, "--grid", "32", "-o", &p(&field)]), 0);
    let sel = d.join("sel.json");
    assert_eq!(
        run(&[
            "select", "--field", &p(&field), "--scene", &scene, "--trace", &p(&g.join("trace.json")), "--cloud",
            &p(&g.join("cloud.csv")), "--technique", "brush-lasso", "-o", &p(&sel),
        ]),
        0
    );
    Artifacts {
        cloud: g.join("cloud.csv"),
        trace: serde_json::from_str(&fs::read_to_string(g.join("trace.json")).unwrap()).unwrap(),
        cli_selection: serde_json::from_str(&fs::read_to_string(&sel).unwrap()).unwrap(),
        cli_obj: fs::read_to_string(sel.with_extension("obj")).unwrap(),
        _dir: dir,
    }
}

fn session_body(a: &Artifacts) -> Value {
    json!({ "scene": scene(), "cloud_path": a.cloud, "estimate": { "resolution": 32 } })
}

#[tokio::test]
async fn session_creation_and_cache() {
    let (_, app) = app();
    let body = json!({
        "scene": scene(),
        "cloud_csv": "x,y,z\n0.0,0.0,-0.05\n0.05,0.02,-0.08\n-0.03,0.04,-0.1\n",
        "estimate": { "resolution": 24 }
    });
    let (status, _, bytes) = call(&app, "POST", "/api/session", Some(body.clone()), &[]).await;
    assert_eq!(status, StatusCode::OK);
    let first = json_of(&bytes);
    assert_eq!(first["cloud"]["points"], 3);
    assert_eq!(first["field"]["ready"], true);
    assert_eq!(first["field"]["cached"], false);

    let (_, _, bytes) = call(&app, "POST", "/api/session", Some(body), &[]).await;
    let second = json_of(&bytes);
    assert_eq!(second["field"]["cached"], true);
    assert_ne!(first["id"], second["id"]);
    assert_eq!(first["field"]["max"], second["field"]["max"]);
}

#[tokio::test]
async fn session_rejections() {
    let (_, app) = app();
    let mut bad = scene();
    bad["surface"]["axis_z"] = json!([1.0, 0.0, 0.0]);
    let cloud = "x,y,z\n0,0,-0.1\n0.1,0,-0.1\n0,0.1,-0.1\n";
    let (status, _, _) = call(&app, "POST", "/api/session", Some(json!({ "scene": bad, "cloud_csv": cloud })), &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _, _) = call(&app, "POST", "/api/session", Some(json!({ "scene": scene(), "cloud_csv": "x,y,z\n" })), &[]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let dup = "x,y,z\n0.1,-0.1,-0.05\n0.1,-0.1,-0.05\n-0.1,0.1,-0.15\n-0.1,0.1,-0.15\n";
    let body = json!({ "scene": scene(), "cloud_csv": dup, "estimate": { "resolution": 16 } });
    let (status, _, _) = call(&app, "POST", "/api/session", Some(body), &[]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, _, _) = call(&app, "POST", "/api/session", Some(json!({ "scene": scene() })), &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = call(&app, "POST", "/api/session", Some(json!("not an object")), &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn select_matches_cli_golden() {
    let a = artifacts();
    let (_, app) = app();
    let id = open(&app, session_body(&a)).await;
    let req = json!({ "trace": a.trace, "technique": "brush-lasso", "mode": "set" });
    let uri = format!("/api/session/{id}/select");
    let (status, _, first) = call(&app, "POST", &uri, Some(req.clone()), &[]).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&first));
    let body = json_of(&first);
    assert_eq!(body["selection"], a.cli_selection);
    assert_eq!(body["mesh"], format!("/api/session/{id}/mesh"));

    // identical state and request: byte-identical response
    let (_, _, again) = call(&app, "POST", &uri, Some(req), &[]).await;
    assert_eq!(first, again);

    let mesh_uri = format!("/api/session/{id}/mesh");
    let (status, headers, obj) = call(&app, "GET", &mesh_uri, None, &[]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(std::str::from_utf8(&obj).unwrap(), a.cli_obj);
    let etag = headers[header::ETAG].to_str().unwrap().to_string();
    let (status, _, _) = call(&app, "GET", &mesh_uri, None, &[("if-none-match", &etag)]).await;
    assert_eq!(status, StatusCode::NOT_MODIFIED);
}

#[tokio::test]
async fn subtract_is_idempotent() {
    let a = artifacts();
    let (_, app) = app();
    let id = open(&app, session_body(&a)).await;
    let uri = format!("/api/session/{id}/select");

    let sub = json!({ "trace": a.trace, "technique": "brush-lasso", "mode": "subtract" });
    let (status, _, _) = call(&app, "POST", &uri, Some(sub.clone()), &[]).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let set = json!({ "trace": a.trace, "technique": "cloud-lasso" });
    let (status, _, bytes) = call(&app, "POST", &uri, Some(set), &[]).await;
    assert_eq!(status, StatusCode::OK);
    let before = json_of(&bytes)["selection"]["selected_points"].as_array().unwrap().len();

    let (_, _, once) = call(&app, "POST", &uri, Some(sub.clone()), &[]).await;
    let (_, _, twice) = call(&app, "POST", &uri, Some(sub), &[]).await;
    assert_eq!(once, twice);
    let after = json_of(&once)["selection"]["selected_points"].as_array().unwrap().len();
    assert!(after < before, "{after} !< {before}");
}

#[tokio::test]
async fn select_errors() {
    let a = artifacts();
    let (state, app) = app();
    let id = open(&app, session_body(&a)).await;
    let uri = format!("/api/session/{id}/select");

    let (status, _, _) = call(&app, "POST", "/api/session/nope/select", Some(json!({ "trace": a.trace, "technique": "brush" })), &[]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&app, "GET", &format!("/api/session/{id}/mesh"), None, &[]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _, _) = call(&app, "POST", &uri, Some(json!({ "trace": { "samples": 3 }, "technique": "brush" })), &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = call(&app, "POST", &uri, Some(json!({ "trace": a.trace, "technique": "paint" })), &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let air = json!({ "samples": [
        { "p": [0.0, 0.0, 0.3], "t": 0.0, "source": "hand" },
        { "p": [0.01, 0.0, 0.3], "t": 0.1, "source": "hand" }
    ]});
    let (status, _, _) = call(&app, "POST", &uri, Some(json!({ "trace": air, "technique": "cloud-lasso" })), &[]).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let session = state.session(&id).unwrap();
    let guard = session.select_lock.try_lock().unwrap();
    let (status, _, _) = call(&app, "POST", &uri, Some(json!({ "trace": a.trace, "technique": "brush-lasso" })), &[]).await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS);
    drop(guard);
    let (status, _, _) = call(&app, "POST", &uri, Some(json!({ "trace": a.trace, "technique": "brush-lasso" })), &[]).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn camera_and_snap() {
    let a = artifacts();
    let (_, app) = app();
    let id = open(&app, session_body(&a)).await;

    let (status, _, bytes) = call(&app, "GET", &format!("/api/session/{id}/camera?head=0,-0.45,0.4"), None, &[]).await;
    assert_eq!(status, StatusCode::OK);
    let cam = json_of(&bytes);
    let proj: Vec<Vec<f64>> = serde_json::from_value(cam["projection"].clone()).unwrap();
    let view: Vec<Vec<f64>> = serde_json::from_value(cam["view"].clone()).unwrap();
    assert_eq!(proj.len(), 4);
    assert_eq!(proj[3], vec![0.0, 0.0, -1.0, 0.0]);

    // the top-right surface corner lands on NDC (1, 1)
    let s = scene();
    let c: Vec<f64> = serde_json::from_value(s["surface"]["center"].clone()).unwrap();
    let ax: Vec<f64> = serde_json::from_value(s["surface"]["axis_x"].clone()).unwrap();
    let az: Vec<f64> = serde_json::from_value(s["surface"]["axis_z"].clone()).unwrap();
    let ay = [az[1] * ax[2] - az[2] * ax[1], az[2] * ax[0] - az[0] * ax[2], az[0] * ax[1] - az[1] * ax[0]];
    let (w, h) = (s["surface"]["width"].as_f64().unwrap(), s["surface"]["height"].as_f64().unwrap());
    let corner: Vec<f64> = (0..3).map(|i| c[i] + ax[i] * w / 2.0 + ay[i] * h / 2.0).chain([1.0]).collect();
    let mul = |m: &Vec<Vec<f64>>, v: &[f64]| -> Vec<f64> { m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect() };
    let clip = mul(&proj, &mul(&view, &corner));
    assert!((clip[0] / clip[3] - 1.0).abs() < 1e-9 && (clip[1] / clip[3] - 1.0).abs() < 1e-9, "{clip:?}");

    let (status, _, _) = call(&app, "GET", &format!("/api/session/{id}/camera?head=0,0.3,-0.5"), None, &[]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _, _) = call(&app, "GET", &format!("/api/session/{id}/camera?head=0,1"), None, &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = call(&app, "GET", "/api/session/none/camera?head=0,0,1", None, &[]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // a pick ray straight down through the data hits a dense point below the glass
    let down = json!({ "origin": [0.0, -0.45, 0.4], "through": [0.0, 0.0, 0.0] });
    let (status, _, bytes) = call(&app, "POST", &format!("/api/session/{id}/snap"), Some(down), &[]).await;
    assert_eq!(status, StatusCode::OK);
    let poi = &json_of(&bytes)["poi"];
    assert!(poi.is_null() || poi.as_array().unwrap().len() == 3);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let state = AppState::new(ServiceConfig {
        ttl: Duration::from_millis(50),
        ..Default::default()
    });
    let app = router(state.clone());
    let body = json!({ "scene": scene(), "cloud_csv": "x,y,z\n0,0,-0.1\n0.1,0,-0.1\n0,0.1,-0.12\n", "estimate": { "resolution": 12 } });
    let id = open(&app, body.clone()).await;
    assert!(state.session(&id).is_some());
    tokio::time::sleep(Duration::from_millis(80)).await;
    assert!(state.session(&id).is_none());

    open(&app, body).await;
    assert_eq!(state.session_count(), 1);
    tokio::time::sleep(Duration::from_millis(80)).await;
    assert_eq!(state.sweep(), 1);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn cors_headers() {
    let (_, app) = app();
    let (_, headers, _) = call(&app, "GET", "/api/session/x/mesh", None, &[("origin", "http://localhost:5173")]).await;
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");

    let state = AppState::new(ServiceConfig {
        ui_origin: Some("http://ui.example".into()),
        ..Default::default()
    });
    let app = router(state);
    let (_, headers, _) = call(&app, "GET", "/api/session/x/mesh", None, &[("origin", "http://ui.example")]).await;
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://ui.example");
}
