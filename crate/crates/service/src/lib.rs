//! HTTP service over the tracing and mesh engines, versioned under `/v1/`.
//!
//! Each project lives in its own directory. Accepted op batches are appended
//! to `ops.jsonl` before they become visible, and the current model is always
//! the replay of that log.

mod project;
mod store;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use planmap_core::geojson::StyleConfig;
use planmap_core::georef::{parse_anchors, GeoAnchor};
use planmap_core::mesh::{encode_png, topdown_raster, Assignments};
use planmap_core::trace::TraceOp;

pub use project::{MeshStage, Project, StageRequest};
pub use store::Store;

/// A structured error body: `{"error": {"kind", "message", ...}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
    pub extra: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> ApiError {
        ApiError { status, kind: kind.into(), message: message.into(), extra: Value::Null }
    }

    pub fn not_found(what: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("{what} not found"))
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn conflict(kind: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, kind, message)
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    fn with(mut self, key: &str, value: Value) -> ApiError {
        if !self.extra.is_object() {
            self.extra = json!({});
        }
        self.extra[key] = value;
        self
    }
}

impl From<planmap_core::Error> for ApiError {
    fn from(e: planmap_core::Error) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, &e.kind(), e.to_string())
    }
}

macro_rules! domain_error {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> ApiError {
                planmap_core::Error::from(e).into()
            }
        }
    )*};
}

domain_error!(
    planmap_core::trace::TraceError,
    planmap_core::sim::SimError,
    planmap_core::georef::GeoError,
    planmap_core::geojson::ExportError,
    planmap_core::mesh::MeshError
);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "kind": self.kind, "message": self.message });
        if let Value::Object(extra) = self.extra {
            for (k, v) in extra {
                body[k] = v;
            }
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/v1/projects", post(create_project))
        .route("/v1/projects/{id}/state", get(get_state))
        .route("/v1/projects/{id}/image", put(upload_image))
        .route("/v1/projects/{id}/ops", post(post_ops))
        .route("/v1/projects/{id}/anchors", put(put_anchors))
        .route("/v1/projects/{id}/style", put(put_style))
        .route("/v1/projects/{id}/export/sim", get(export_sim))
        .route("/v1/projects/{id}/export/geojson", get(export_geojson))
        .route("/v1/projects/{id}/export/populated", get(export_populated))
        .route("/v1/projects/{id}/mesh", put(upload_mesh))
        .route("/v1/projects/{id}/stages/{name}", post(run_stage).get(get_stage))
        .route("/v1/projects/{id}/superpixels/topdown", get(get_topdown))
        .route("/v1/projects/{id}/assignments", post(post_assignments))
        .with_state(store)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    width: Option<f64>,
    height: Option<f64>,
}

async fn create_project(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateProject = if body.iter().all(u8::is_ascii_whitespace) {
        CreateProject::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    let size = match (req.width, req.height) {
        (Some(w), Some(h)) if w > 0.0 && h > 0.0 => Some((w, h)),
        (None, None) => None,
        _ => return Err(ApiError::bad_request("width and height must both be positive")),
    };
    let p = store.create(size).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": p.id, "version": p.version }))))
}

async fn get_state(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(store.snapshot(&id)?.state_json()))
}

/// Body bytes from a multipart upload (first field) or a raw body.
async fn upload_bytes(req: Request) -> ApiResult<Bytes> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if is_multipart {
        let mut mp = Multipart::from_request(req, &()).await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        let field = mp
            .next_field()
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?
            .ok_or_else(|| ApiError::bad_request("multipart body has no file field"))?;
        field.bytes().await.map_err(|e| ApiError::bad_request(e.body_text()))
    } else {
        Bytes::from_request(req, &()).await.map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

async fn upload_image(State(store): State<Arc<Store>>, Path(id): Path<String>, req: Request) -> ApiResult<Json<Value>> {
    let bytes = upload_bytes(req).await?;
    let p = store.set_image(&id, bytes.to_vec()).await?;
    Ok(Json(json!({ "version": p.version, "width": p.width, "height": p.height })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpBatch {
    base_version: u64,
    ops: Vec<TraceOp>,
}

async fn post_ops(State(store): State<Arc<Store>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let batch: OpBatch = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (p, outcomes) = store.apply_ops(&id, batch.base_version, batch.ops).await?;
    Ok(Json(json!({ "version": p.version, "outcomes": outcomes })))
}

fn is_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorBody {
    anchors: Vec<GeoAnchor>,
}

/// Anchors as JSON `{"anchors": [...]}` or as the TOML anchor file.
async fn put_anchors(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> ApiResult<Json<Value>> {
    let anchors = if is_json(&headers) {
        serde_json::from_str::<AnchorBody>(&body).map_err(|e| ApiError::bad_request(e.to_string()))?.anchors
    } else {
        parse_anchors(&body)?
    };
    let (p, rms) = store.set_anchors(&id, anchors).await?;
    Ok(Json(json!({ "version": p.version, "rms_residual": rms })))
}

async fn put_style(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> ApiResult<Json<Value>> {
    let style = if is_json(&headers) {
        let s: StyleConfig = serde_json::from_str(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
        s.validate()?;
        s
    } else {
        StyleConfig::from_toml(&body)?
    };
    let p = store.set_style(&id, style).await?;
    Ok(Json(json!({ "version": p.version })))
}

fn text(content_type: &'static str, body: String) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

async fn export_sim(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(text("text/plain; charset=utf-8", store.snapshot(&id)?.export_sim()?))
}

async fn export_geojson(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(text("application/geo+json", store.snapshot(&id)?.export_geojson()?))
}

async fn export_populated(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(text("application/geo+json", store.snapshot(&id)?.export_populated()?))
}

#[derive(Debug, Default, Deserialize)]
struct MeshQuery {
    #[serde(default)]
    z_up: bool,
}

async fn upload_mesh(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<MeshQuery>,
    req: Request,
) -> ApiResult<Json<Value>> {
    let bytes = upload_bytes(req).await?;
    let (p, report) = store.set_mesh(&id, bytes.to_vec(), q.z_up).await?;
    Ok(Json(json!({ "version": p.version, "report": report })))
}

async fn run_stage(
    State(store): State<Arc<Store>>,
    Path((id, name)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let params: Value = if body.iter().all(u8::is_ascii_whitespace) {
        json!({})
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    let stage = StageRequest::parse(&name, params)?;
    let p = store.run_stage(&id, stage).await?;
    let artifact = p.stage_artifact(&name)?;
    Ok(Json(json!({ "version": p.version, "result": artifact })))
}

async fn get_stage(State(store): State<Arc<Store>>, Path((id, name)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    Ok(Json(store.snapshot(&id)?.stage_artifact(&name)?))
}

#[derive(Debug, Deserialize)]
struct TopdownQuery {
    #[serde(default = "default_ppm")]
    pixels_per_metre: f64,
}

fn default_ppm() -> f64 {
    50.0
}

#[derive(Serialize)]
struct Topdown {
    png_base64: String,
    legend: planmap_core::mesh::Legend,
}

async fn get_topdown(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<TopdownQuery>,
) -> ApiResult<Json<Topdown>> {
    let p = store.snapshot(&id)?;
    let (mesh, labels) = p.segmented_mesh()?;
    let (img, legend) = topdown_raster(mesh, labels, q.pixels_per_metre)?;
    let png_base64 = base64::engine::general_purpose::STANDARD.encode(encode_png(&img));
    Ok(Json(Topdown { png_base64, legend }))
}

async fn post_assignments(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> ApiResult<Json<Value>> {
    let a = if is_json(&headers) {
        serde_json::from_str::<Assignments>(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    } else {
        Assignments::from_toml(&body)?
    };
    let p = store.set_assignments(&id, a).await?;
    Ok(Json(json!({ "version": p.version, "boxes": p.boxes })))
}

impl ApiError {
    pub(crate) fn version_conflict(current: u64, base: u64) -> ApiError {
        ApiError::conflict("VersionConflict", format!("batch is based on version {base}, current version is {current}"))
            .with("current_version", json!(current))
    }

    pub(crate) fn op_failed(index: usize, e: planmap_core::trace::TraceError) -> ApiError {
        ApiError::from(e).with("op_index", json!(index))
    }
}
