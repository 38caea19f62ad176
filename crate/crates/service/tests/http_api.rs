use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pexplore::interp::{extract_slice, FixedValue, InterpolatedField};
use pexplore::model::ModelRegistry;
use pexplore_service::config::RunConfig;
use pexplore_service::http::{router, AppState};
use pexplore_service::pipeline::{self, RunKind};
use pexplore_service::store::RunStore;
use serde_json::Value;
use tower::ServiceExt;

const CUBE: &str = r#"{"model": {"kind": "sin-square"}, "axes": [
    {"name": "p1", "lo": 0, "hi": 2, "spacing": 0.25},
    {"name": "p2", "lo": 0, "hi": 2, "spacing": 0.5}
], "relevance": {"k4": 2}, "exploration": {"tol": 0.5, "fraction": 0.2, "seed": 11}}"#;

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
    store: RunStore,
    explore_id: String,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let cfg = RunConfig::from_json(CUBE).unwrap();
    let out = pipeline::run(&cfg, &ModelRegistry::with_builtins(), RunKind::Explore).unwrap();
    let explore_id = store.persist(&out).unwrap();
    let state = Arc::new(AppState::new(store.clone(), ModelRegistry::with_builtins(), 2));
    Fixture { _dir: dir, app: router(state), store, explore_id }
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::test]
async fn lists_and_describes_runs() {
    let f = fixture();
    let (status, body) = get(&f.app, "/runs").await;
    assert_eq!(status, StatusCode::OK);
    let runs = json(&body);
    assert_eq!(runs[0]["id"], f.explore_id.as_str());
    assert_eq!(runs[0]["status"], "done");
    assert_eq!(runs[0]["axes"], serde_json::json!(["p1", "p2"]));

    let (status, body) = get(&f.app, &format!("/runs/{}", f.explore_id)).await;
    assert_eq!(status, StatusCode::OK);
    let detail = json(&body);
    assert_eq!(detail["config"]["exploration"]["tol"], 0.5);
    let loaded = f.store.load(&f.explore_id).unwrap();
    assert_eq!(detail["counters"]["counters"]["neighbors_copied"], loaded.result.counters.neighbors_copied);

    let (status, body) = get(&f.app, &format!("/runs/{}/status", f.explore_id)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["status"], "done");
}

#[tokio::test]
async fn unknown_runs_are_not_found() {
    let f = fixture();
    for uri in ["/runs/run-000042", "/runs/run-000042/status", "/runs/run-000042/slice?axes=p1,p2", "/runs/nonsense"] {
        let (status, _) = get(&f.app, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
}

#[tokio::test]
async fn slice_matches_library_bytes() {
    let f = fixture();
    let (status, body) = get(&f.app, &format!("/runs/{}/slice?axes=p2,p1", f.explore_id)).await;
    assert_eq!(status, StatusCode::OK);

    let run = f.store.load(&f.explore_id).unwrap();
    let field = InterpolatedField::new(&run.grid, &run.result).unwrap();
    let direct = extract_slice(&field, ["p2", "p1"], &[]).unwrap();
    assert_eq!(body, serde_json::to_vec(&direct).unwrap());

    let v = json(&body);
    assert_eq!(v["axes"], serde_json::json!(["p2", "p1"]));
    assert_eq!(v["values"].as_array().unwrap().len(), 5);
    assert_eq!(v["flags"][0].as_array().unwrap().len(), 9);
}

#[tokio::test]
async fn malformed_slices_are_bad_requests() {
    let f = fixture();
    let id = &f.explore_id;
    for (query, needle) in [
        ("axes=p1", "two axes"),
        ("axes=p1,p9", "unknown axis 'p9'"),
        ("axes=p1,p1", "must differ"),
        ("axes=p1,p2&fix=p1:0.5", "cannot also be fixed"),
        ("axes=p1,p2&fix=p3", "NAME:VALUE"),
    ] {
        let (status, body) = get(&f.app, &format!("/runs/{id}/slice?{query}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{query}");
        let msg = json(&body)["error"].as_str().unwrap().to_string();
        assert!(msg.contains(needle), "{query}: {msg}");
    }
}

#[tokio::test]
async fn off_grid_fixed_value_names_nearest_planes() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let cfg = RunConfig::from_json(
        r#"{"model": "budworm", "axes": [
            {"name": "p3", "lo": 20000, "hi": 21000, "spacing": 500},
            {"name": "p5", "lo": 24000, "hi": 32000, "spacing": 4000},
            {"name": "p6", "lo": 1.0, "hi": 2.0, "spacing": 0.5}
        ], "relevance": {"k3": 4}}"#,
    )
    .unwrap();
    let resolved = cfg.resolve(&ModelRegistry::with_builtins()).unwrap();
    // Values for the slice test do not need the ODE; a smooth stand-in is enough.
    let result = pexplore::explore::run_full(&resolved.grid, &|p: &[f64]| {
        Ok::<f64, pexplore::cycle::EvalError>(p[2] / 1e4 + p[4] / 1e5 - p[5])
    });
    let out = pipeline::RunOutput {
        kind: RunKind::Full,
        config: cfg,
        grid: resolved.grid,
        relevance: None,
        result,
        timing: Default::default(),
    };
    let id = store.persist(&out).unwrap();
    let app = router(Arc::new(AppState::new(store.clone(), ModelRegistry::with_builtins(), 1)));

    let (status, body) = get(&app, &format!("/runs/{id}/slice?axes=p3,p6&fix=p5:29000")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let msg = json(&body)["error"].as_str().unwrap().to_string();
    assert!(msg.contains("28000") && msg.contains("32000"), "{msg}");

    let (status, body) = get(&app, &format!("/runs/{id}/slice?axes=p3,p6&fix=p5:28000")).await;
    assert_eq!(status, StatusCode::OK);
    let field = InterpolatedField::new(&out.grid, &out.result).unwrap();
    let direct = extract_slice(&field, ["p3", "p6"], &[FixedValue { name: "p5".into(), value: 28000.0 }]).unwrap();
    assert_eq!(body, serde_json::to_vec(&direct).unwrap());
    assert!(direct.flags.iter().flatten().all(|f| f.as_str() == "computed"));
}

async fn wait_done(app: &Router, id: &str) -> Value {
    for _ in 0..400 {
        let (_, body) = get(app, &format!("/runs/{id}/status")).await;
        let v = json(&body);
        if v["status"] == "done" || v["status"] == "failed" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    panic!("run {id} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn posted_runs_execute_under_new_ids() {
    let f = fixture();
    let before: Vec<u8> = std::fs::read(f.store.root().join(&f.explore_id).join("entries.csv")).unwrap();

    let post = |uri: &str, body: &str| Request::post(uri).body(Body::from(body.to_string())).unwrap();
    let (status, body) = send(&f.app, post("/runs?kind=full", CUBE)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let reply = json(&body);
    let id = reply["id"].as_str().unwrap().to_string();
    assert_ne!(id, f.explore_id);
    assert_eq!(reply["status"], "queued");

    assert_eq!(wait_done(&f.app, &id).await["status"], "done");
    let full = f.store.load(&id).unwrap();
    assert_eq!(full.result.len(), 45);
    assert_eq!(full.kind, RunKind::Full);

    // Existing runs are left untouched.
    let after = std::fs::read(f.store.root().join(&f.explore_id).join("entries.csv")).unwrap();
    assert_eq!(before, after);

    let (_, body) = get(&f.app, &format!("/runs/{id}/slice?axes=p1,p2")).await;
    assert!(json(&body)["flags"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|f| f == "computed"));
}

#[tokio::test]
async fn invalid_posts_are_rejected_with_fields() {
    let f = fixture();
    let bad = CUBE.replace(r#""name": "p2""#, r#""name": "q2""#);
    let (status, body) = send(&f.app, Request::post("/runs").body(Body::from(bad)).unwrap()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v = json(&body);
    assert_eq!(v["fields"][0]["field"], "axes[1].name");

    let (status, _) = send(&f.app, Request::post("/runs").body(Body::from("{not json")).unwrap()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send(&f.app, Request::post("/runs?kind=sideways").body(Body::from(CUBE)).unwrap()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(f.store.ids().unwrap().len(), 1, "rejected posts must not create runs");
}
