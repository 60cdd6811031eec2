//! HTTP routes. See `docs/api.md` for request and response bodies.

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::edit::{Edit, EditError};
use crate::worker::{Format, FrameBytes, Layer, Quality, Stopped, Worker};

pub const FRAME_INDEX_HEADER: &str = "x-frame-index";

fn error(status: StatusCode, message: impl Into<String>, field: Option<&str>) -> Response {
    let mut body = json!({ "error": message.into() });
    if let Some(f) = field.filter(|f| !f.is_empty()) {
        body["field"] = json!(f);
    }
    (status, Json(body)).into_response()
}

fn stopped(_: Stopped) -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "render thread stopped", None)
}

fn frame_response(frame: FrameBytes, content_type: &'static str) -> Response {
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    headers.insert(FRAME_INDEX_HEADER, HeaderValue::from(frame.index));
    (StatusCode::OK, headers, frame.bytes).into_response()
}

async fn get_scene(State(worker): State<Worker>, headers: HeaderMap) -> Response {
    let desc = match worker.scene().await {
        Ok(d) => d,
        Err(e) => return stopped(e),
    };
    let wants_toml = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("toml"));
    if wants_toml {
        ([(header::CONTENT_TYPE, "application/toml")], desc.to_toml()).into_response()
    } else {
        Json(desc).into_response()
    }
}

fn parse_body(body: &Bytes) -> Result<Value, Response> {
    serde_json::from_slice(body)
        .map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed JSON body: {e}"), None))
}

async fn run_edit(worker: &Worker, body: Bytes, make: impl FnOnce(Value) -> Edit) -> Response {
    let patch = match parse_body(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    match worker.edit(make(patch)).await {
        Err(e) => stopped(e),
        Ok(Ok(v)) => Json(v).into_response(),
        Ok(Err(e @ EditError::NotFound { .. })) => error(StatusCode::NOT_FOUND, e.to_string(), None),
        Ok(Err(e @ EditError::BadBody(_))) => error(StatusCode::BAD_REQUEST, e.to_string(), None),
        Ok(Err(EditError::Invalid { field, message })) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, message, Some(&field))
        }
    }
}

async fn patch_light(State(w): State<Worker>, Path(id): Path<String>, body: Bytes) -> Response {
    run_edit(&w, body, |patch| Edit::Light { id, patch }).await
}

async fn patch_object(State(w): State<Worker>, Path(id): Path<String>, body: Bytes) -> Response {
    run_edit(&w, body, |patch| Edit::Object { id, patch }).await
}

async fn patch_material(State(w): State<Worker>, Path(id): Path<String>, body: Bytes) -> Response {
    run_edit(&w, body, |patch| Edit::Material { id, patch }).await
}

async fn patch_camera(State(w): State<Worker>, body: Bytes) -> Response {
    run_edit(&w, body, |patch| Edit::Camera { patch }).await
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRequest {
    #[serde(default)]
    quality: Quality,
}

async fn post_frame(State(worker): State<Worker>, body: Bytes) -> Response {
    let req: FrameRequest = if body.iter().all(u8::is_ascii_whitespace) {
        FrameRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), Some("quality")),
        }
    };
    match worker.frame(req.quality).await {
        Err(e) => stopped(e),
        Ok(Ok(frame)) => frame_response(frame, "image/x-portable-pixmap"),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e, None),
    }
}

#[derive(Debug, Default, Deserialize)]
struct LayerQuery {
    #[serde(default)]
    format: Format,
}

async fn get_layer(
    State(worker): State<Worker>,
    Path(name): Path<String>,
    Query(q): Query<LayerQuery>,
) -> Response {
    let Ok(layer) = serde_json::from_value::<Layer>(json!(name)) else {
        return error(StatusCode::NOT_FOUND, format!("no layer `{name}`"), None);
    };
    match worker.layer(layer, q.format).await {
        Err(e) => stopped(e),
        Ok(None) => error(StatusCode::NOT_FOUND, "no frame rendered yet", None),
        Ok(Some(frame)) => frame_response(
            frame,
            match q.format {
                Format::Ppm => "image/x-portable-pixmap",
                Format::Pfm => "image/x-portable-floatmap",
            },
        ),
    }
}

pub fn router(worker: Worker) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/scene/camera", patch(patch_camera))
        .route("/scene/lights/{id}", patch(patch_light))
        .route("/scene/objects/{id}", patch(patch_object))
        .route("/scene/materials/{id}", patch(patch_material))
        .route("/frame", post(post_frame))
        .route("/frame/layers/{name}", get(get_layer))
        .with_state(worker)
}
