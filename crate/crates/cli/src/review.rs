//! JSON API and static assets for the review UI.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mscbench_core::evaluation::{ComparisonRow, EvaluationError, QualityScore, ReportFormat};
use mscbench_core::store::{RunRecord, RunStore, StoreError};
use mscbench_core::{MscCode, Taxonomy, ValidationStatus};
use serde::{Deserialize, Serialize};
use tower_http::services::{ServeDir, ServeFile};

use crate::commands::render_report;

pub struct ReviewState {
    pub store: RunStore,
    pub taxonomy: &'static Taxonomy,
    /// Bearer token required on `/api` when set.
    pub token: Option<String>,
    writes: tokio::sync::Mutex<()>,
}

impl ReviewState {
    pub fn new(store: RunStore, taxonomy: &'static Taxonomy, token: Option<String>) -> Self {
        ReviewState {
            store,
            taxonomy,
            token,
            writes: tokio::sync::Mutex::new(()),
        }
    }
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><title>mscbench review</title></head>\n<body><p>No UI assets configured. Pass --ui-dir or set MSCBENCH_UI_DIR; the JSON API is under /api.</p></body></html>\n";

pub fn router(state: Arc<ReviewState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{run_id}/discrepancies", get(discrepancies))
        .route("/runs/{run_id}/scores", post(post_score))
        .route("/runs/{run_id}/distribution", get(distribution))
        .route("/runs/{run_id}/report", get(report))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no such endpoint") })
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    let app = Router::new().nest("/api", api);
    match ui_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => app.fallback(|| async { Html(PLACEHOLDER) }),
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(serde_json::json!({ "error": self.message }));
        (self.status, body).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        let status = match &err {
            StoreError::UnknownRun(_) | StoreError::UnknownRow { .. } => StatusCode::NOT_FOUND,
            StoreError::Evaluation(EvaluationError::MatchingRow(_)) => StatusCode::CONFLICT,
            StoreError::Locked(_) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, err.to_string())
    }
}

async fn require_token(
    State(state): State<Arc<ReviewState>>,
    headers: HeaderMap,
    request: Request,
    next: Next,
) -> Response {
    if let Some(token) = &state.token {
        let presented = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(request).await
}

/// Store calls block on file IO.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn evaluated(state: &ReviewState, run_id: &str) -> Result<RunRecord, ApiError> {
    let record = state.store.load_run(run_id)?;
    if !record.is_evaluated() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("run {run_id} is not evaluated"),
        ));
    }
    Ok(record)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub created_at: Option<String>,
    pub model_id: Option<String>,
    pub source: Option<String>,
    pub evaluated: bool,
    pub n_items: usize,
    pub n_matching: usize,
    pub n_differing: usize,
    pub n_scored: usize,
}

async fn list_runs(
    State(state): State<Arc<ReviewState>>,
) -> Result<Json<Vec<RunSummary>>, ApiError> {
    blocking(move || {
        let mut out = Vec::new();
        for run_id in state.store.list_runs()? {
            let record = state.store.load_run(&run_id)?;
            let report = record.report();
            out.push(RunSummary {
                created_at: record.created_at.map(|t| t.to_rfc3339()),
                model_id: record.config.model_id.clone(),
                source: record.config.source.clone(),
                evaluated: record.is_evaluated(),
                n_items: report.aggregates.n_items,
                n_matching: report.aggregates.n_matching,
                n_differing: report.aggregates.n_differing,
                n_scored: report.quality_distribution.values().sum(),
                run_id,
            });
        }
        Ok(Json(out))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CodeView {
    pub code: String,
    pub status: ValidationStatus,
    pub description: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct DiscrepancyView {
    pub arxiv_id: String,
    pub url: String,
    pub title: Option<String>,
    pub abstract_text: Option<String>,
    pub msc_section: String,
    pub arxiv_msc: String,
    pub arxiv_codes: Vec<CodeView>,
    pub llm_primary: Vec<CodeView>,
    pub llm_secondary: Vec<CodeView>,
    pub n_primary_wrong: usize,
    pub n_primary_missed: usize,
    pub n_secondary_extra: usize,
    pub quality: Option<i8>,
    pub reviewer: Option<String>,
    pub notes: Option<String>,
}

fn code_view(taxonomy: &Taxonomy, code: &MscCode) -> CodeView {
    CodeView {
        code: code.canonical(),
        status: taxonomy.validate(code),
        description: taxonomy.description(code).map(str::to_string),
    }
}

fn discrepancy_view(
    taxonomy: &Taxonomy,
    record: &RunRecord,
    row: &ComparisonRow,
) -> DiscrepancyView {
    let id = row.arxiv_id();
    let item = record.sample.as_ref().and_then(|s| s.item(id));
    let arxiv_codes = mscbench_core::corpus::parse_ground_truth(&row.identity.arxiv_msc)
        .codes
        .iter()
        .map(|c| code_view(taxonomy, c))
        .collect();
    let views = |codes: &[MscCode]| codes.iter().map(|c| code_view(taxonomy, c)).collect();
    DiscrepancyView {
        arxiv_id: id.to_string(),
        url: format!("https://arxiv.org/abs/{id}"),
        title: item.map(|i| i.title.clone()),
        abstract_text: item.map(|i| i.abstract_text.clone()),
        msc_section: row.identity.msc_section.clone(),
        arxiv_msc: row.identity.arxiv_msc.clone(),
        arxiv_codes,
        llm_primary: views(&row.llm_primary),
        llm_secondary: views(&row.llm_secondary),
        n_primary_wrong: row.n_primary_wrong,
        n_primary_missed: row.n_primary_missed,
        n_secondary_extra: row.n_secondary_extra,
        quality: row.quality.map(QualityScore::value),
        reviewer: row.reviewer.clone(),
        notes: row.notes.clone(),
    }
}

async fn discrepancies(
    State(state): State<Arc<ReviewState>>,
    Path(run_id): Path<String>,
) -> Result<Json<Vec<DiscrepancyView>>, ApiError> {
    blocking(move || {
        let record = evaluated(&state, &run_id)?;
        let report = record.report();
        Ok(Json(
            report
                .differing()
                .map(|row| discrepancy_view(state.taxonomy, &record, row))
                .collect(),
        ))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub arxiv_id: String,
    pub score: i64,
    #[serde(default)]
    pub reviewer: Option<String>,
    #[serde(default)]
    pub notes: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreResponse {
    pub arxiv_id: String,
    pub previous: Option<i8>,
    pub score: i8,
    pub reviewer: Option<String>,
    pub notes: Option<String>,
    pub at: String,
}

async fn post_score(
    State(state): State<Arc<ReviewState>>,
    Path(run_id): Path<String>,
    body: Result<Json<ScoreRequest>, JsonRejection>,
) -> Result<Json<ScoreResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let score = QualityScore::from_value(req.score)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let held = state.clone();
    let _guard = held.writes.lock().await;
    blocking(move || {
        let _lock = state.store.try_lock()?;
        evaluated(&state, &run_id)?;
        let change =
            state
                .store
                .record_score(&run_id, &req.arxiv_id, score, req.reviewer, req.notes)?;
        Ok(Json(ScoreResponse {
            arxiv_id: change.arxiv_id,
            previous: change.previous.map(QualityScore::value),
            score: change.score.value(),
            reviewer: change.reviewer,
            notes: change.notes,
            at: change.at.to_rfc3339(),
        }))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Bucket {
    pub score: i8,
    pub symbol: String,
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Distribution {
    pub buckets: Vec<Bucket>,
    pub unscored: usize,
}

async fn distribution(
    State(state): State<Arc<ReviewState>>,
    Path(run_id): Path<String>,
) -> Result<Json<Distribution>, ApiError> {
    blocking(move || {
        let report = evaluated(&state, &run_id)?.report();
        let buckets = QualityScore::ALL
            .iter()
            .map(|q| Bucket {
                score: q.value(),
                symbol: q.symbol().to_string(),
                label: q.label().to_string(),
                count: report.quality_distribution.get(q).copied().unwrap_or(0),
            })
            .collect();
        Ok(Json(Distribution {
            buckets,
            unscored: report.unscored,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn report(
    State(state): State<Arc<ReviewState>>,
    Path(run_id): Path<String>,
    Query(query): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    let (format, content_type) = match query.format.as_deref() {
        None | Some("markdown") | Some("md") => {
            (ReportFormat::Markdown, "text/markdown; charset=utf-8")
        }
        Some("csv") => (ReportFormat::Csv, "text/csv; charset=utf-8"),
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("unknown report format {other:?}"),
            ))
        }
    };
    blocking(move || {
        let record = evaluated(&state, &run_id)?;
        let text = render_report(&record, format)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        Ok(([(header::CONTENT_TYPE, content_type)], text).into_response())
    })
    .await
}
