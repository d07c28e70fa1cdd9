//! Read-only JSON API over a fitted model artifact.
//!
//! Endpoints live under `/api/v1`; everything else falls through to an
//! optional static asset directory. Every response carries the artifact
//! checksum in [`FINGERPRINT_HEADER`].

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use crashrisk::advisor::{
    heatmap, rank_slots, summarize_with_totals, validate_precip, CoefficientRow, LevelTotals,
    SlotModel, SlotQuery, RANKING_CAVEAT,
};
use crashrisk::artifact::{load_model, GlmArtifact, LoadedArtifact, ModelArtifact};
use crashrisk::features::FeatureSchema;
use crashrisk::glm::DispersionReport;
use serde::Serialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

pub const FINGERPRINT_HEADER: &str = "x-model-fingerprint";
/// Header value when no artifact is loaded.
pub const NO_MODEL: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    ModelError,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>, detail: Option<Value>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: ErrorCode::BadRequest,
            message: message.into(),
            detail,
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: ErrorCode::NotFound,
            message: message.into(),
            detail: None,
        }
    }

    pub fn model_error(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: ErrorCode::ModelError,
            message: message.into(),
            detail: None,
        }
    }

    fn field(field: &str, message: String) -> Self {
        let detail = json!({ "errors": [{ "field": field, "message": message }] });
        ApiError::bad_request(message, Some(detail))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, &self)
    }
}

fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match serde_json::to_vec(body) {
        Ok(bytes) => Response::builder()
            .status(status)
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(bytes))
            .expect("static response parts"),
        Err(e) => ApiError::model_error(format!("response serialization failed: {e}")).into_response(),
    }
}

/// A summary row plus the coefficient as a full-precision decimal string
/// (absent for reference levels).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    #[serde(flatten)]
    pub row: CoefficientRow,
    pub coefficient_decimal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitMeta {
    pub schema: Option<FeatureSchema>,
    pub column_names: Vec<String>,
    pub alpha_decimal: String,
    pub converged: bool,
    pub iterations: usize,
    pub rank: usize,
    pub n_obs: usize,
    pub log_likelihood: f64,
    pub poisson_log_likelihood: Option<f64>,
    pub test_rmse: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub warnings: Vec<String>,
    pub data_fingerprint: String,
    pub artifact_sha256: String,
    pub caveat: &'static str,
}

/// Payload of `GET /api/v1/model`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDocument {
    pub family: &'static str,
    pub alpha: f64,
    /// Estimated coefficients only.
    pub rows: Vec<ModelRow>,
    /// Levels absorbed into the intercept under reference-cell coding.
    pub reference_rows: Vec<ModelRow>,
    pub dispersion: Option<DispersionReport>,
    pub fit_meta: FitMeta,
}

pub fn model_document(artifact: &GlmArtifact, sha256: &str) -> crashrisk::Result<ModelDocument> {
    let model = &artifact.model;
    let totals = artifact.diagnostics.level_totals.clone().unwrap_or(LevelTotals {
        hour: vec![0; 24],
        weekday: vec![0; 7],
        month: vec![0; 12],
        precip: 0,
        total: 0,
    });
    let (reference_rows, rows): (Vec<_>, Vec<_>) = summarize_with_totals(model, &totals)?
        .into_iter()
        .map(|row| {
            let coefficient_decimal = model
                .column_names
                .iter()
                .position(|c| *c == row.name)
                .filter(|_| !row.reference)
                .map(|j| model.beta[j].to_string());
            ModelRow {
                row,
                coefficient_decimal,
            }
        })
        .partition(|r| r.row.reference);
    let d = &artifact.diagnostics;
    Ok(ModelDocument {
        family: model.family.label(),
        alpha: model.alpha,
        rows,
        reference_rows,
        dispersion: d.dispersion,
        fit_meta: FitMeta {
            schema: model.schema.clone(),
            column_names: model.column_names.clone(),
            alpha_decimal: model.alpha.to_string(),
            converged: model.converged,
            iterations: model.iterations,
            rank: model.rank,
            n_obs: model.n_obs,
            log_likelihood: model.log_likelihood,
            poisson_log_likelihood: d.poisson_log_likelihood,
            test_rmse: d.test_rmse,
            n_train: d.n_train,
            n_test: d.n_test,
            warnings: model.warnings.clone(),
            data_fingerprint: artifact.data_fingerprint.clone(),
            artifact_sha256: sha256.to_string(),
            caveat: RANKING_CAVEAT,
        },
    })
}

/// Immutable state shared by all handlers.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    loaded: Option<Arc<LoadedArtifact>>,
}

impl AppState {
    pub fn new(loaded: Option<LoadedArtifact>) -> Self {
        AppState {
            loaded: loaded.map(Arc::new),
        }
    }

    pub fn from_path(path: &Path) -> crashrisk::Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(AppState::new(Some(load_model(std::io::BufReader::new(file))?)))
    }

    pub fn fingerprint(&self) -> &str {
        self.loaded.as_ref().map_or(NO_MODEL, |l| l.sha256.as_str())
    }

    fn slot_model(&self) -> Result<&dyn SlotModel, ApiError> {
        match self.loaded.as_deref() {
            None => Err(ApiError::not_found("no model artifact loaded")),
            Some(l) => Ok(match &l.artifact {
                ModelArtifact::Glm(a) => &a.model,
                ModelArtifact::Forest(a) => &a.model,
            }),
        }
    }
}

/// All API routes, plus `static_dir` (if any) served at `/`.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/v1/model", get(get_model))
        .route("/api/v1/rank", post(post_rank))
        .route("/api/v1/heatmap", get(get_heatmap))
        .method_not_allowed_fallback(|| async {
            ApiError {
                status: StatusCode::METHOD_NOT_ALLOWED,
                code: ErrorCode::BadRequest,
                message: "method not allowed".into(),
                detail: None,
            }
        });
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::not_found("no such route") }),
    };
    let fingerprint = HeaderValue::from_str(state.fingerprint()).unwrap_or(HeaderValue::from_static(NO_MODEL));
    app.with_state(state)
        .layer(axum::middleware::map_response(move |mut res: Response| {
            let fingerprint = fingerprint.clone();
            async move {
                res.headers_mut().insert(FINGERPRINT_HEADER, fingerprint);
                res
            }
        }))
}

/// Binds and serves until the process is stopped.
pub async fn serve(bind: &str, state: AppState, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    axum::serve(listener, router(state, static_dir)).await
}

async fn get_model(State(state): State<AppState>) -> Response {
    let Some(loaded) = state.loaded.as_deref() else {
        return ApiError::not_found("no model artifact loaded").into_response();
    };
    match &loaded.artifact {
        ModelArtifact::Glm(a) => match model_document(a, &loaded.sha256) {
            Ok(doc) => json_response(StatusCode::OK, &doc),
            Err(e) => ApiError::model_error(e.to_string()).into_response(),
        },
        ModelArtifact::Forest(_) => {
            ApiError::model_error("the loaded artifact is a random forest and has no coefficient table")
                .into_response()
        }
    }
}

/// Field-level checks before handing the query to the ranking code, so
/// the error detail can name the offending field.
fn check_query(query: &SlotQuery, schema: &FeatureSchema) -> Result<(), ApiError> {
    let mut errors = Vec::new();
    if query.slots.is_empty() {
        errors.push(json!({ "field": "slots", "message": "at least one slot is required" }));
    }
    for (i, slot) in query.slots.iter().enumerate() {
        if slot.hour > 23 {
            errors.push(json!({
                "field": format!("slots[{i}].hour"),
                "message": format!("hour {} outside 0-23", slot.hour),
            }));
        }
        if !(1..=12).contains(&slot.month) {
            errors.push(json!({
                "field": format!("slots[{i}].month"),
                "message": format!("month {} outside 1-12", slot.month),
            }));
        }
    }
    if let Err(e) = validate_precip(schema, query.precip) {
        errors.push(json!({ "field": "precip", "message": e.to_string() }));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ApiError::bad_request(
            "invalid ranking request",
            Some(json!({ "errors": errors })),
        ))
    }
}

async fn post_rank(State(state): State<AppState>, body: Bytes) -> Response {
    let model = match state.slot_model() {
        Ok(m) => m,
        Err(e) => return e.into_response(),
    };
    let query: SlotQuery = match serde_json::from_slice(&body) {
        Ok(q) => q,
        Err(e) => return ApiError::bad_request(format!("invalid JSON body: {e}"), None).into_response(),
    };
    let schema = match model.schema() {
        Ok(s) => s,
        Err(e) => return ApiError::model_error(e.to_string()).into_response(),
    };
    if let Err(e) = check_query(&query, schema) {
        return e.into_response();
    }
    match rank_slots(model, &query) {
        Ok(ranked) => json_response(StatusCode::OK, &ranked),
        Err(e) => ApiError::model_error(e.to_string()).into_response(),
    }
}

async fn get_heatmap(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Response {
    let model = match state.slot_model() {
        Ok(m) => m,
        Err(e) => return e.into_response(),
    };
    let month = match params.get("month").map(|m| m.parse::<u8>()) {
        Some(Ok(m)) if (1..=12).contains(&m) => m,
        Some(_) => return ApiError::field("month", "month must be an integer in 1-12".into()).into_response(),
        None => return ApiError::field("month", "month is required".into()).into_response(),
    };
    let precip = match params.get("precip").map(|p| p.parse::<f64>()) {
        None => 0.0,
        Some(Ok(p)) => p,
        Some(Err(_)) => return ApiError::field("precip", "precip must be a number".into()).into_response(),
    };
    let schema = match model.schema() {
        Ok(s) => s,
        Err(e) => return ApiError::model_error(e.to_string()).into_response(),
    };
    if let Err(e) = validate_precip(schema, precip) {
        return ApiError::field("precip", e.to_string()).into_response();
    }
    match heatmap(model, month, precip) {
        Ok(map) => json_response(StatusCode::OK, &map),
        Err(e) => ApiError::model_error(e.to_string()).into_response(),
    }
}
