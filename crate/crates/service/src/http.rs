//! HTTP binding. Handlers are thin; all rules live in [`Platform`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{rejection::JsonRejection, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::app::{
    AdmissionRequest, ApiError, CampaignDefinition, FieldError, Platform, ResponseSubmission,
    SessionRequest,
};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({ "error": m })),
            ApiError::Forbidden(m) => (StatusCode::FORBIDDEN, json!({ "error": m })),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::Unprocessable(fields) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "invalid request", "fields": fields }),
            ),
            ApiError::Internal(m) => {
                tracing::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m }))
            }
        };
        (status, Json(body)).into_response()
    }
}

/// Malformed JSON bodies become 422 with the deserializer's message.
fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| {
        ApiError::Unprocessable(vec![FieldError {
            field: "body".into(),
            reason: e.body_text(),
        }])
    })
}

type Shared = Arc<Platform>;

#[derive(Debug, Deserialize)]
struct DownsampleQuery {
    #[serde(default = "one")]
    downsample: u32,
}

fn one() -> u32 {
    1
}

pub fn router(platform: Shared) -> Router {
    Router::new()
        .route("/campaigns", post(create_campaign))
        .route("/participants", post(admit))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_step))
        .route("/sessions/{id}/steps/{step}/response", post(submit))
        .route("/campaigns/{id}/frames/{fid}/samples.csv", get(samples_csv))
        .route("/campaigns/{id}/frames/{fid}/density.json", get(density))
        .route("/campaigns/{id}/frames/{fid}/heatmap.pgm", get(heatmap))
        .route("/campaigns/{id}/frames/{fid}/compare", post(compare))
        .with_state(platform)
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn create_campaign(
    State(p): State<Shared>,
    payload: Result<Json<CampaignDefinition>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let def = body(payload)?;
    let created = blocking(move || p.create_campaign(def)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn admit(
    State(p): State<Shared>,
    payload: Result<Json<AdmissionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let admitted = blocking(move || p.admit(req)).await?;
    Ok((StatusCode::CREATED, Json(admitted)))
}

async fn create_session(
    State(p): State<Shared>,
    payload: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let created = blocking(move || p.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn next_step(State(p): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || p.next_step(&id)).await?))
}

async fn submit(
    State(p): State<Shared>,
    Path((id, step)): Path<(String, u64)>,
    payload: Result<Json<ResponseSubmission>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let sub = body(payload)?;
    Ok(Json(blocking(move || p.submit(&id, step, sub)).await?))
}

async fn samples_csv(
    State(p): State<Shared>,
    Path((id, fid)): Path<(String, usize)>,
) -> Result<impl IntoResponse, ApiError> {
    let csv = blocking(move || p.samples_csv(&id, fid)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv))
}

async fn density(
    State(p): State<Shared>,
    Path((id, fid)): Path<(String, usize)>,
    Query(q): Query<DownsampleQuery>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || p.density(&id, fid, q.downsample)).await?))
}

async fn heatmap(
    State(p): State<Shared>,
    Path((id, fid)): Path<(String, usize)>,
    Query(q): Query<DownsampleQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let pgm = blocking(move || p.heatmap_pgm(&id, fid, q.downsample)).await?;
    Ok(([(header::CONTENT_TYPE, "image/x-portable-graymap")], pgm))
}

async fn compare(
    State(p): State<Shared>,
    Path((id, fid)): Path<(String, usize)>,
    Query(q): Query<DownsampleQuery>,
    mut multipart: Multipart,
) -> Result<impl IntoResponse, ApiError> {
    let mut reference: Option<Bytes> = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::BadRequest(e.to_string()))?
    {
        if field.name() == Some("reference") {
            reference = Some(field.bytes().await.map_err(|e| ApiError::BadRequest(e.to_string()))?);
        }
    }
    let reference = reference.ok_or_else(|| {
        ApiError::Unprocessable(vec![FieldError {
            field: "reference".into(),
            reason: "missing multipart field".into(),
        }])
    })?;
    Ok(Json(blocking(move || p.compare(&id, fid, &reference, q.downsample)).await?))
}
