//! HTTP/JSON front end for the optimization toolkit.
//!
//! Routes:
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/health` | | `{"status":"ok"}` |
//! | POST | `/runs` | `RunSettings` | `SubmitResponse` (202) |
//! | GET | `/runs` | | list of `JobView` without records |
//! | GET | `/runs/{id}` | | `JobView` |
//! | GET | `/runs/{id}/report` | | `ReportResponse` |
//! | POST | `/reports` | `ReportRequest` | `ReportResponse` |
//! | POST | `/ops/evaluate` | `EvaluateRequest` | `ValueResponse` |
//! | POST | `/ops/score` | `ScoreRequest` | `ValueResponse` |
//! | POST | `/ops/pareto` | `ParetoRequest` | `ParetoResponse` |
//! | POST | `/ops/design` | `DesignRequest` | `DesignResponse` |

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use uuid::Uuid;

use bbo_core::acq::analytic::{ei_score, pi_score, ucb_score, UcbSchedule, DEFAULT_UCB_DELTA};
use bbo_core::acq::geometric::{pareto_front, ScoredCandidate};
use bbo_core::api::{
    DesignRequest, DesignResponse, ErrorBody, EvaluateRequest, JobState, JobView, ParetoRequest,
    ParetoResponse, ReportRequest, ReportResponse, ScoreKind, ScoreRequest, SubmitResponse,
    ValueResponse,
};
use bbo_core::discretize::lhd_maximin;
use bbo_core::harness::config::RunSettings;
use bbo_core::harness::{grid_cells, render_reports, run_grid_with_progress, LHD_RESTARTS};
use bbo_core::problems::ProblemSpec;
use bbo_core::RngStream;

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(e: impl ToString) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.to_string())
    }

    fn not_found(id: &str) -> Self {
        ApiError(StatusCode::NOT_FOUND, format!("no run with id {id}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone, Default)]
pub struct AppState {
    jobs: Arc<RwLock<HashMap<String, JobView>>>,
    allow_external: bool,
}

impl AppState {
    /// `allow_external` lets clients run arbitrary executables as objectives.
    pub fn new(allow_external: bool) -> Self {
        Self { allow_external, ..Self::default() }
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobView)) {
        if let Some(view) = self.jobs.write().expect("job table poisoned").get_mut(id) {
            f(view);
        }
    }
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/runs", post(submit_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/report", get(run_report))
        .route("/reports", post(make_report))
        .route("/ops/evaluate", post(evaluate))
        .route("/ops/score", post(score))
        .route("/ops/pareto", post(pareto))
        .route("/ops/design", post(design))
        .with_state(state)
}

/// Serves the API on an already bound listener until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, app(state)).await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn submit_run(
    State(state): State<AppState>,
    Json(settings): Json<RunSettings>,
) -> Result<(StatusCode, Json<SubmitResponse>), ApiError> {
    let configs = settings.configs().map_err(ApiError::bad_request)?;
    if !state.allow_external && configs.iter().any(|c| c.problem.external.is_some()) {
        return Err(ApiError(
            StatusCode::FORBIDDEN,
            "external objectives are disabled on this server (start it with --allow-external)"
                .into(),
        ));
    }
    let cells = grid_cells(&configs);
    let id = Uuid::new_v4().to_string();
    let view = JobView {
        id: id.clone(),
        state: JobState::Queued,
        settings: settings.clone(),
        cells,
        cells_done: 0,
        cells_failed: 0,
        error: None,
        records: None,
    };
    state.jobs.write().expect("job table poisoned").insert(id.clone(), view);
    tracing::info!(%id, cells, "run submitted");

    let worker = state.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        worker.update(&job_id, |v| v.state = JobState::Running);
        let progress = worker.clone();
        let pid = job_id.clone();
        let parallel = settings.parallelism();
        let result = tokio::task::spawn_blocking(move || {
            run_grid_with_progress(&configs, parallel, |n, rec| {
                progress.update(&pid, |v| {
                    v.cells_done = n;
                    v.cells_failed += !rec.is_ok() as usize;
                })
            })
        })
        .await;
        match result {
            Ok(records) => {
                let failed = records.iter().filter(|r| !r.is_ok()).count();
                tracing::info!(id = %job_id, failed, "run finished");
                worker.update(&job_id, |v| {
                    v.state = JobState::Done;
                    v.cells_failed = failed;
                    v.records = Some(records);
                });
            }
            Err(e) => {
                tracing::error!(id = %job_id, "run panicked: {e}");
                worker.update(&job_id, |v| {
                    v.state = JobState::Failed;
                    v.error = Some(e.to_string());
                });
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(SubmitResponse { id, cells })))
}

async fn list_runs(State(state): State<AppState>) -> Json<Vec<JobView>> {
    let jobs = state.jobs.read().expect("job table poisoned");
    let mut views: Vec<JobView> =
        jobs.values().map(|v| JobView { records: None, ..v.clone() }).collect();
    views.sort_by(|a, b| a.id.cmp(&b.id));
    Json(views)
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<JobView> {
    let jobs = state.jobs.read().expect("job table poisoned");
    jobs.get(&id).map(|v| Json(v.clone())).ok_or_else(|| ApiError::not_found(&id))
}

async fn run_report(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<ReportResponse> {
    let records = {
        let jobs = state.jobs.read().expect("job table poisoned");
        let view = jobs.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
        match (&view.state, &view.records) {
            (JobState::Done, Some(r)) => r.clone(),
            (s, _) => {
                return Err(ApiError(
                    StatusCode::CONFLICT,
                    format!("run {id} is {s:?}; reports need a finished run"),
                ))
            }
        }
    };
    let files = render_reports(&records).map_err(ApiError::bad_request)?;
    Ok(Json(ReportResponse { files }))
}

async fn make_report(Json(req): Json<ReportRequest>) -> ApiResult<ReportResponse> {
    let files = render_reports(&req.records).map_err(ApiError::bad_request)?;
    Ok(Json(ReportResponse { files }))
}

async fn evaluate(Json(req): Json<EvaluateRequest>) -> ApiResult<ValueResponse> {
    let spec = ProblemSpec::from_kind(req.problem, req.x.len()).map_err(ApiError::bad_request)?;
    if !spec.bounds.contains(&req.x) {
        return Err(ApiError::bad_request("point lies outside the problem domain"));
    }
    let value = spec.evaluate(&req.x).map_err(ApiError::bad_request)?;
    Ok(Json(ValueResponse { value }))
}

async fn score(Json(req): Json<ScoreRequest>) -> ApiResult<ValueResponse> {
    if !(req.std >= 0.0) || !req.mean.is_finite() || !req.incumbent.is_finite() {
        return Err(ApiError::bad_request("mean and incumbent must be finite, std >= 0"));
    }
    let value = match req.kind {
        ScoreKind::Ei => ei_score(req.mean, req.std, req.incumbent),
        ScoreKind::Pi => pi_score(req.mean, req.std, req.incumbent),
        ScoreKind::Ucb => {
            let schedule = UcbSchedule::new(
                req.delta.unwrap_or(DEFAULT_UCB_DELTA),
                req.cardinality.unwrap_or(1000),
                req.t.unwrap_or(1),
            )
            .map_err(ApiError::bad_request)?;
            ucb_score(req.mean, req.std, &schedule)
        }
    };
    Ok(Json(ValueResponse { value }))
}

async fn pareto(Json(req): Json<ParetoRequest>) -> ApiResult<ParetoResponse> {
    let cands: Vec<ScoredCandidate> = req
        .candidates
        .iter()
        .map(|c| ScoredCandidate { point: Vec::new(), f_hat: c.f_hat, delta: c.delta })
        .collect();
    Ok(Json(ParetoResponse { indices: pareto_front(&cands).indices }))
}

async fn design(Json(req): Json<DesignRequest>) -> ApiResult<DesignResponse> {
    if req.n == 0 || req.dim == 0 || req.n > 100_000 {
        return Err(ApiError::bad_request("need 1 <= n <= 100000 and dim >= 1"));
    }
    let mut rng = RngStream::new(req.seed, 0);
    let points = lhd_maximin(req.n, req.dim, &mut rng, LHD_RESTARTS);
    Ok(Json(DesignResponse { points }))
}
