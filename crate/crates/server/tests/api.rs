use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use bbo_core::api::{JobState, JobView, ReportResponse, SubmitResponse};
use bbo_server::{app, AppState};

async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn wait_done(router: &Router, id: &str) -> JobView {
    for _ in 0..600 {
        let (status, body) = call(router, "GET", &format!("/runs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let view: JobView = serde_json::from_value(body).unwrap();
        if view.state.is_finished() {
            return view;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("run {id} did not finish");
}

fn small_run() -> Value {
    json!({
        "problem": "rastrigin, levy",
        "dim": 2,
        "acq": "EEPA+, sEI",
        "disc": "uniform",
        "budget": 12,
        "init": 6,
        "reps": 2,
        "candidates": 50,
        "seed": 5
    })
}

#[tokio::test]
async fn health() {
    let router = app(AppState::default());
    let (status, body) = call(&router, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn run_lifecycle_and_reports() {
    let router = app(AppState::default());
    let (status, body) = call(&router, "POST", "/runs", Some(small_run())).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let submitted: SubmitResponse = serde_json::from_value(body).unwrap();
    // 2 problems x 2 strategies x 2 reps
    assert_eq!(submitted.cells, 8);

    let view = wait_done(&router, &submitted.id).await;
    assert_eq!(view.state, JobState::Done);
    assert_eq!(view.cells_done, 8);
    assert_eq!(view.cells_failed, 0);
    let records = view.records.unwrap();
    assert_eq!(records.len(), 8);
    assert!(records.iter().all(|r| r.evaluations() == 12));

    let (status, body) = call(&router, "GET", &format!("/runs/{}/report", submitted.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let report: ReportResponse = serde_json::from_value(body).unwrap();
    let names: Vec<&str> = report.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(&names[..3], &["convergence.csv", "summary.csv", "ranks.csv"]);
    assert_eq!(report.files[0].contents.lines().count(), 1 + 8 * 12);
    // one ranks row per strategy and problem
    assert_eq!(report.files[2].contents.lines().count(), 1 + 4);

    // the stateless report endpoint renders the same files
    let (status, body) =
        call(&router, "POST", "/reports", Some(json!({ "records": records }))).await;
    assert_eq!(status, StatusCode::OK);
    let again: ReportResponse = serde_json::from_value(body).unwrap();
    assert_eq!(again, report);

    let (status, body) = call(&router, "GET", "/runs", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body.as_array().unwrap().len(), 1);
    assert!(body[0].get("records").is_none());
}

#[tokio::test]
async fn invalid_runs_are_rejected() {
    let router = app(AppState::default());
    let (status, body) = call(&router, "POST", "/runs", Some(json!({"acq": "nope"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("nope"));

    let (status, _) = call(&router, "POST", "/runs", Some(json!({"budget": 3, "dim": 2}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&router, "GET", "/runs/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&router, "POST", "/reports", Some(json!({"records": []}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn external_objectives_need_opt_in() {
    let body = json!({"problem": "external", "dim": 2, "external_cmd": "/bin/true", "reps": 1});
    let router = app(AppState::default());
    let (status, _) = call(&router, "POST", "/runs", Some(body.clone())).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let router = app(AppState::new(true));
    let (status, _) = call(&router, "POST", "/runs", Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
}

#[cfg(unix)]
#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn external_run_failure_is_isolated() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("obj.sh");
    std::fs::write(&script, "#!/bin/sh\nread line\necho nan\n").unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let router = app(AppState::new(true));
    let body = json!({
        "problem": "external", "dim": 2, "external_cmd": script, "reps": 2, "budget": 5
    });
    let (_, body) = call(&router, "POST", "/runs", Some(body)).await;
    let id = body["id"].as_str().unwrap().to_string();
    let view = wait_done(&router, &id).await;
    assert_eq!(view.state, JobState::Done);
    assert_eq!(view.cells_failed, 2);
    let (status, _) = call(&router, "GET", &format!("/runs/{id}/report"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn operation_endpoints() {
    let router = app(AppState::default());

    let (status, body) = call(
        &router,
        "POST",
        "/ops/evaluate",
        Some(json!({"problem": "rosenbrock", "x": [-1.0, 1.0]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["value"], json!(4.0));

    let (status, _) = call(
        &router,
        "POST",
        "/ops/evaluate",
        Some(json!({"problem": "rastrigin", "x": [9.0]})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, body) = call(
        &router,
        "POST",
        "/ops/score",
        Some(json!({"kind": "ei", "mean": 0.0, "std": 1.0, "incumbent": 0.0})),
    )
    .await;
    assert!((body["value"].as_f64().unwrap() - 0.398942).abs() < 1e-6);

    let (_, body) = call(
        &router,
        "POST",
        "/ops/score",
        Some(json!({"kind": "ucb", "mean": 0.0, "std": 1.0, "cardinality": 1000, "t": 1})),
    )
    .await;
    assert!((body["value"].as_f64().unwrap() - 19.416081f64.sqrt()).abs() < 1e-5);

    let cands = json!({"candidates": [
        {"f_hat": 0.5, "delta": 1.0}, {"f_hat": 1.0, "delta": 5.0},
        {"f_hat": 2.0, "delta": 7.0}, {"f_hat": 3.0, "delta": 3.0}
    ]});
    let (_, body) = call(&router, "POST", "/ops/pareto", Some(cands)).await;
    assert_eq!(body["indices"], json!([0, 1, 2]));

    let (status, body) =
        call(&router, "POST", "/ops/design", Some(json!({"n": 5, "dim": 3, "seed": 1}))).await;
    assert_eq!(status, StatusCode::OK);
    let pts = body["points"].as_array().unwrap();
    assert_eq!(pts.len(), 5);
    assert!(pts.iter().all(|p| p.as_array().unwrap().len() == 3));
}
