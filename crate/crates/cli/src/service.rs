//! JSON-over-HTTP facade over one loaded, read-only model.
//!
//! | route              | body                                          | response                              |
//! |--------------------|-----------------------------------------------|---------------------------------------|
//! | `GET /model/info`  |                                               | fingerprint, skeleton, layout, sizes  |
//! | `POST /encode`     | `{pose}`                                      | `{latent, continuous?}`               |
//! | `POST /decode`     | `{latent}`                                    | `{pose, joint_positions}`             |
//! | `POST /modify`     | `{base, source \| reference_name, part}`      | `{latent, pose, joint_positions}`     |
//! | `POST /interpolate`| `{from_pose, to_pose, steps}`                 | `{frames: [{pose, joint_positions}]}` |
//! | `POST /sample`     | `{seed?}`                                     | `{latent, pose, joint_positions}`     |
//! | `POST /reference`  | `{name, pose}`                                | `{name, stored}`                      |
//! | `GET /reference`   |                                               | `{references: [name]}`                |
//!
//! Pose and latent payloads use the same JSON forms as the CLI, and the
//! `pose` member of every response is emitted with the same serializer as
//! `qposer decode`, so the bytes match. Errors are `{"error": message}` with
//! 400 for malformed or invariant-violating payloads, 404 for unknown parts or
//! references and 409 for latents from another model.

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use indexmap::IndexMap;
use qposer_core::geometry::{forward_kinematics, Pose};
use qposer_core::model::{ContinuousLatent, LatentCode, QPoserModel};
use qposer_core::rng::SplitMix64;
use qposer_core::wire::{self, LatentJson, PoseJson};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use tower_http::services::ServeDir;

pub const MAX_BODY_BYTES: usize = 1 << 20;
pub const MAX_REFERENCES: usize = 64;
pub const MAX_INTERPOLATION_STEPS: usize = 1000;

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    pub static_dir: Option<PathBuf>,
    pub expose_continuous: bool,
}

/// Named reference poses, evicting the least recently used beyond capacity.
#[derive(Debug, Default)]
struct ReferenceStore {
    entries: IndexMap<String, Pose>,
}

impl ReferenceStore {
    fn insert(&mut self, name: String, pose: Pose) {
        self.entries.shift_remove(&name);
        self.entries.insert(name, pose);
        while self.entries.len() > MAX_REFERENCES {
            self.entries.shift_remove_index(0);
        }
    }

    fn get(&mut self, name: &str) -> Option<Pose> {
        let pose = self.entries.shift_remove(name)?;
        self.entries.insert(name.to_string(), pose.clone());
        Some(pose)
    }
}

struct Session {
    model: QPoserModel,
    options: ServiceOptions,
    references: Mutex<ReferenceStore>,
}

type Shared = Arc<Session>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<qposer_core::Error> for ApiError {
    fn from(e: qposer_core::Error) -> Self {
        use qposer_core::Error as E;
        let status = match &e {
            E::UnknownPart { .. } => StatusCode::NOT_FOUND,
            E::FingerprintMismatch { .. } => StatusCode::CONFLICT,
            E::NonFinite(_) | E::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = std::result::Result<Response, ApiError>;

fn json_body(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse<T: DeserializeOwned>(headers: &HeaderMap, body: &[u8]) -> std::result::Result<T, ApiError> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(';').next().is_some_and(|m| m.trim().eq_ignore_ascii_case("application/json")));
    if !is_json {
        return Err(ApiError::bad_request("content type must be application/json"));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed payload: {e}")))
}

impl Session {
    fn pose(&self, json: PoseJson) -> std::result::Result<Pose, ApiError> {
        Ok(json.into_pose(self.model.skeleton())?)
    }

    fn latent(&self, json: LatentJson) -> std::result::Result<LatentCode, ApiError> {
        let code = json.into_code(self.model.layout())?;
        if code.fingerprint != self.model.fingerprint() {
            return Err(qposer_core::Error::FingerprintMismatch {
                expected: self.model.fingerprint(),
                actual: code.fingerprint,
            }
            .into());
        }
        Ok(code)
    }

    /// `"pose":...,"joint_positions":...` members for a decoded pose.
    fn pose_members(&self, pose: &Pose) -> std::result::Result<String, ApiError> {
        let positions = forward_kinematics(pose, self.model.skeleton())?;
        let positions = serde_json::to_string(&positions).expect("positions serialize");
        Ok(format!("\"pose\":{},\"joint_positions\":{positions}", wire::pose_to_string(pose)))
    }

    fn latent_member(&self, code: &LatentCode) -> String {
        format!("\"latent\":{}", wire::latent_to_string(code, self.model.layout()))
    }

    fn continuous_json(&self, z: &ContinuousLatent) -> serde_json::Value {
        let parts: serde_json::Map<String, serde_json::Value> = self
            .model
            .layout()
            .parts
            .iter()
            .zip(&z.parts)
            .map(|(p, v)| (p.name.clone(), json!(v)))
            .collect();
        json!({ "parts": parts, "global": z.global })
    }
}

/// Runs model work off the async worker threads.
async fn blocking(state: Shared, f: impl FnOnce(&Session) -> ApiResult + Send + 'static) -> ApiResult {
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        })?
}

async fn model_info(State(s): State<Shared>) -> Response {
    let m = &s.model;
    let sizes: serde_json::Map<String, serde_json::Value> =
        m.codebooks().iter().map(|b| (b.id().to_string(), json!(b.size()))).collect();
    axum::Json(json!({
        "fingerprint": format!("{:016x}", m.fingerprint()),
        "skeleton": m.skeleton().to_file(),
        "layout": m.layout(),
        "codebook_sizes": sizes,
        "slot_count": m.layout().slot_count(),
    }))
    .into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodeRequest {
    pose: PoseJson,
}

async fn encode(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: EncodeRequest = parse(&headers, &body)?;
    blocking(s, move |s| {
        let pose = s.pose(req.pose)?;
        let (z, code) = s.model.encode(&pose)?;
        let mut out = format!("{{{}", s.latent_member(&code));
        if s.options.expose_continuous {
            out.push_str(&format!(",\"continuous\":{}", s.continuous_json(&z)));
        }
        out.push('}');
        Ok(json_body(out))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecodeRequest {
    latent: LatentJson,
}

async fn decode(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: DecodeRequest = parse(&headers, &body)?;
    blocking(s, move |s| {
        let code = s.latent(req.latent)?;
        let pose = s.model.decode_quantized(&code)?;
        Ok(json_body(format!("{{{}}}", s.pose_members(&pose)?)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModifyRequest {
    base: LatentJson,
    #[serde(default)]
    source: Option<LatentJson>,
    #[serde(default)]
    reference_name: Option<String>,
    part: String,
}

async fn modify(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: ModifyRequest = parse(&headers, &body)?;
    blocking(s, move |s| {
        let base = s.latent(req.base)?;
        let source = match (req.source, req.reference_name) {
            (Some(src), None) => s.latent(src)?,
            (None, Some(name)) => {
                let pose = s
                    .references
                    .lock()
                    .expect("reference store lock")
                    .get(&name)
                    .ok_or_else(|| ApiError::not_found(format!("unknown reference `{name}`")))?;
                s.model.encode(&pose)?.1
            }
            _ => return Err(ApiError::bad_request("give exactly one of `source` and `reference_name`")),
        };
        let edited = s.model.modify_part(&base, &req.part, &source)?;
        let pose = s.model.decode_quantized(&edited)?;
        Ok(json_body(format!("{{{},{}}}", s.latent_member(&edited), s.pose_members(&pose)?)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolateRequest {
    from_pose: PoseJson,
    to_pose: PoseJson,
    steps: usize,
}

async fn interpolate(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: InterpolateRequest = parse(&headers, &body)?;
    if !(2..=MAX_INTERPOLATION_STEPS).contains(&req.steps) {
        return Err(ApiError::bad_request(format!(
            "steps must lie in [2, {MAX_INTERPOLATION_STEPS}], got {}",
            req.steps
        )));
    }
    blocking(s, move |s| {
        let a = s.pose(req.from_pose)?;
        let b = s.pose(req.to_pose)?;
        let frames = s
            .model
            .interpolate(&a, &b, req.steps)?
            .iter()
            .map(|f| s.pose_members(f).map(|m| format!("{{{m}}}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(json_body(format!("{{\"frames\":[{}]}}", frames.join(","))))
    })
    .await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SampleRequest {
    #[serde(default)]
    seed: Option<u64>,
}

async fn sample(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: SampleRequest = if body.is_empty() {
        SampleRequest::default()
    } else {
        parse(&headers, &body)?
    };
    blocking(s, move |s| {
        let (code, pose) = s.model.sample(&mut SplitMix64::new(req.seed.unwrap_or(0)))?;
        Ok(json_body(format!("{{{},{}}}", s.latent_member(&code), s.pose_members(&pose)?)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceRequest {
    name: String,
    pose: PoseJson,
}

async fn put_reference(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: ReferenceRequest = parse(&headers, &body)?;
    if req.name.is_empty() {
        return Err(ApiError::bad_request("reference name must be nonempty"));
    }
    let pose = s.pose(req.pose)?;
    let mut store = s.references.lock().expect("reference store lock");
    store.insert(req.name.clone(), pose);
    Ok(axum::Json(json!({ "name": req.name, "stored": store.entries.len() })).into_response())
}

async fn list_references(State(s): State<Shared>) -> Response {
    let store = s.references.lock().expect("reference store lock");
    let names: Vec<&String> = store.entries.keys().collect();
    axum::Json(json!({ "references": names })).into_response()
}

pub fn router(model: QPoserModel, options: ServiceOptions) -> Router {
    let static_dir = options.static_dir.clone();
    let state = Arc::new(Session {
        model,
        options,
        references: Mutex::new(ReferenceStore::default()),
    });
    let api = Router::new()
        .route("/model/info", get(model_info))
        .route("/encode", post(encode))
        .route("/decode", post(decode))
        .route("/modify", post(modify))
        .route("/interpolate", post(interpolate))
        .route("/sample", post(sample))
        .route("/reference", get(list_references).post(put_reference))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
