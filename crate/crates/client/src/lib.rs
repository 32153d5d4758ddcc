//! Thin HTTP client for `bbo-server`.

use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use reqwest::{Response, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

use bbo_core::api::{
    DesignRequest, DesignResponse, ErrorBody, EvaluateRequest, JobView, ParetoRequest,
    ParetoResponse, ReportRequest, ReportResponse, ScoreRequest, SubmitResponse, ValueResponse,
};
use bbo_core::harness::config::RunSettings;
use bbo_core::harness::{ReportFile, RunRecord};

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:8080";

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Self { base, http: reqwest::Client::new() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn decode<T: DeserializeOwned>(resp: Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return resp.json().await.context("malformed response body");
        }
        let text = resp.text().await.unwrap_or_default();
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => bail!("server returned {status}: {}", body.error),
            Err(_) => bail!("server returned {status}: {text}"),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let resp = self
            .http
            .get(self.url(path))
            .send()
            .await
            .with_context(|| format!("cannot reach {}", self.base))?;
        Self::decode(resp).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let resp = self
            .http
            .post(self.url(path))
            .json(body)
            .send()
            .await
            .with_context(|| format!("cannot reach {}", self.base))?;
        Self::decode(resp).await
    }

    pub async fn health(&self) -> Result<()> {
        let resp = self
            .http
            .get(self.url("/health"))
            .send()
            .await
            .with_context(|| format!("cannot reach {}", self.base))?;
        match resp.status() {
            StatusCode::OK => Ok(()),
            s => Err(anyhow!("health check returned {s}")),
        }
    }

    pub async fn submit(&self, settings: &RunSettings) -> Result<SubmitResponse> {
        self.post("/runs", settings).await
    }

    pub async fn run(&self, id: &str) -> Result<JobView> {
        self.get(&format!("/runs/{id}")).await
    }

    pub async fn runs(&self) -> Result<Vec<JobView>> {
        self.get("/runs").await
    }

    /// Polls until the run finishes. `on_progress` sees every poll.
    pub async fn wait(
        &self,
        id: &str,
        every: Duration,
        mut on_progress: impl FnMut(&JobView),
    ) -> Result<JobView> {
        loop {
            let view = self.run(id).await?;
            on_progress(&view);
            if view.state.is_finished() {
                return Ok(view);
            }
            tokio::time::sleep(every).await;
        }
    }

    pub async fn run_report(&self, id: &str) -> Result<Vec<ReportFile>> {
        let r: ReportResponse = self.get(&format!("/runs/{id}/report")).await?;
        Ok(r.files)
    }

    pub async fn report(&self, records: Vec<RunRecord>) -> Result<Vec<ReportFile>> {
        let r: ReportResponse = self.post("/reports", &ReportRequest { records }).await?;
        Ok(r.files)
    }

    pub async fn evaluate(&self, req: &EvaluateRequest) -> Result<f64> {
        let r: ValueResponse = self.post("/ops/evaluate", req).await?;
        Ok(r.value)
    }

    pub async fn score(&self, req: &ScoreRequest) -> Result<f64> {
        let r: ValueResponse = self.post("/ops/score", req).await?;
        Ok(r.value)
    }

    pub async fn pareto(&self, req: &ParetoRequest) -> Result<Vec<usize>> {
        let r: ParetoResponse = self.post("/ops/pareto", req).await?;
        Ok(r.indices)
    }

    pub async fn design(&self, req: &DesignRequest) -> Result<Vec<Vec<f64>>> {
        let r: DesignResponse = self.post("/ops/design", req).await?;
        Ok(r.points)
    }
}
