//! HTTP routes. Bodies are JSON except file uploads (multipart) and raw
//! document downloads.

use std::str::FromStr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use sawmatch_core::matching::Justification;
use sawmatch_core::sawsdl::ElementNode;
use sawmatch_core::{MatchConfig, NodeKind, Query, SimAlgorithm, SimKind, Strategy, Tier};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::error::RegistryError;
use crate::fetch::{fetch, FetchConfig};
use crate::registry::Registry;

/// Weight and threshold bounds accepted from API clients.
pub const API_MIN: f64 = 0.1;
pub const API_MAX: f64 = 0.9;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub fetch: FetchConfig,
}

pub struct ApiError(RegistryError);

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(RegistryError::validation("body", e.body_text()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, field) = match &self.0 {
            RegistryError::Validation { field, .. } => (StatusCode::UNPROCESSABLE_ENTITY, Some(field.clone())),
            RegistryError::Unparsable { .. } => (StatusCode::UNPROCESSABLE_ENTITY, Some("file".to_string())),
            RegistryError::NotFound { .. } => (StatusCode::NOT_FOUND, None),
            RegistryError::Duplicate(_) => (StatusCode::CONFLICT, None),
            RegistryError::Fetch { .. } => (StatusCode::BAD_GATEWAY, Some("url".to_string())),
            RegistryError::TooLarge { .. } => (StatusCode::PAYLOAD_TOO_LARGE, None),
            RegistryError::Store(_) | RegistryError::Corrupt(_) | RegistryError::Io(_) => {
                log::error!("{}", self.0);
                (StatusCode::INTERNAL_SERVER_ERROR, None)
            }
        };
        let message = match &self.0 {
            RegistryError::Validation { message, .. } => message.clone(),
            other => other.to_string(),
        };
        (status, Json(json!({ "field": field, "message": message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, RegistryError> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(RegistryError::Io(std::io::Error::other(e.to_string())))),
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.fetch.max_bytes as usize + 64 * 1024;
    Router::new()
        .route("/healthz", get(healthz))
        .route("/collections", post(create_collection).get(list_collections))
        .route("/collections/{id}", get(get_collection))
        .route("/collections/{id}/services", get(list_services).post(upload_service))
        .route("/services/{id}", get(get_service))
        .route("/services/{id}/document", get(get_service_document))
        .route("/ontologies", post(upload_ontology).get(list_ontologies))
        .route("/ontologies/{id}/classes", get(ontology_classes))
        .route("/match", post(run_match))
        .layer(DefaultBodyLimit::max(limit))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct NewCollection {
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    uploader: String,
}

async fn create_collection(
    State(st): State<AppState>,
    body: Result<Json<NewCollection>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let Json(req) = body?;
    let reg = st.registry.clone();
    let c = blocking(move || reg.create_collection(&req.name, &req.description, &req.uploader)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": c.id }))))
}

#[derive(Serialize)]
struct CollectionSummary {
    id: String,
    name: String,
    description: String,
    uploader: String,
    created: String,
    service_count: usize,
}

async fn list_collections(State(st): State<AppState>) -> ApiResult<Json<Vec<CollectionSummary>>> {
    let reg = st.registry.clone();
    let all = blocking(move || reg.collections()).await?;
    Ok(Json(
        all.into_iter()
            .map(|c| CollectionSummary {
                service_count: c.services.len(),
                id: c.id,
                name: c.name,
                description: c.description,
                uploader: c.uploader,
                created: c.created,
            })
            .collect(),
    ))
}

async fn get_collection(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<crate::Collection>> {
    let reg = st.registry.clone();
    Ok(Json(blocking(move || reg.collection(&id)).await?))
}

async fn list_services(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<crate::ServiceRecord>>> {
    let reg = st.registry.clone();
    Ok(Json(blocking(move || reg.services_in(&id)).await?))
}

#[derive(Deserialize)]
struct UrlSource {
    url: String,
}

/// Reads an uploaded document: the `file` part of a multipart body, or a
/// JSON `{url}` that is fetched.
async fn read_source(st: &AppState, req: Request) -> ApiResult<(String, Vec<u8>)> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if is_multipart {
        let mut mp = Multipart::from_request(req, st)
            .await
            .map_err(|e| RegistryError::validation("file", e.body_text()))?;
        while let Some(field) = mp
            .next_field()
            .await
            .map_err(|e| RegistryError::validation("file", e.body_text()))?
        {
            let is_file = field.name() == Some("file") || field.file_name().is_some();
            if !is_file {
                continue;
            }
            let name = field.file_name().unwrap_or("upload").to_string();
            let bytes = field
                .bytes()
                .await
                .map_err(|e| RegistryError::validation("file", e.body_text()))?;
            return Ok((name, bytes.to_vec()));
        }
        return Err(RegistryError::validation("file", "multipart body has no `file` part").into());
    }
    let Json(src) = Json::<UrlSource>::from_request(req, st).await?;
    let url = src.url.trim().to_string();
    if url.is_empty() {
        return Err(RegistryError::validation("url", "url must not be empty").into());
    }
    let cfg = st.fetch;
    let fetched_url = url.clone();
    let bytes = blocking(move || fetch(&fetched_url, cfg)).await?;
    log::info!("fetched {} bytes from {url}", bytes.len());
    Ok((url, bytes))
}

async fn upload_service(
    State(st): State<AppState>,
    Path(id): Path<String>,
    req: Request,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let reg = st.registry.clone();
    // fail fast on an unknown collection before reading or fetching the body
    let cid = id.clone();
    blocking(move || reg.collection(&cid)).await?;
    let (source, bytes) = read_source(&st, req).await?;
    let reg = st.registry.clone();
    let rec = blocking(move || reg.add_service(&id, &source, &bytes)).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "id": rec.id, "service_name": rec.service_name, "warnings": rec.warnings })),
    ))
}

#[derive(Serialize)]
struct TreeNode {
    name: String,
    kind: NodeKind,
    annotations: Vec<String>,
    children: Vec<TreeNode>,
}

/// Turns the depth-annotated DFS node list back into a nested tree.
fn nest(nodes: &[ElementNode]) -> Vec<TreeNode> {
    fn take(nodes: &[ElementNode], i: &mut usize, min_depth: usize) -> Vec<TreeNode> {
        let mut out = Vec::new();
        while *i < nodes.len() && nodes[*i].depth >= min_depth {
            let n = &nodes[*i];
            *i += 1;
            let children = take(nodes, i, n.depth + 1);
            out.push(TreeNode {
                name: n.local_name.clone(),
                kind: n.node_kind,
                annotations: n.annotations.clone(),
                children,
            });
        }
        out
    }
    let mut i = 0;
    let mut roots = Vec::new();
    while i < nodes.len() {
        let depth = nodes[i].depth;
        roots.extend(take(nodes, &mut i, depth));
    }
    roots
}

async fn get_service(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let reg = st.registry.clone();
    let (record, desc) = blocking(move || Ok((reg.service(&id)?, reg.service_description(&id)?))).await?;
    let interfaces: Vec<_> = desc
        .interfaces
        .iter()
        .map(|iface| {
            let ops: Vec<_> = iface
                .operations
                .iter()
                .map(|op| {
                    json!({
                        "name": op.name,
                        "annotations": op.annotations,
                        "input": nest(&op.input_tree.nodes),
                        "output": nest(&op.output_tree.nodes),
                    })
                })
                .collect();
            json!({ "name": iface.name, "operations": ops })
        })
        .collect();
    Ok(Json(json!({
        "id": record.id,
        "collection_id": record.collection_id,
        "source": record.source,
        "service_name": record.service_name,
        "uploaded": record.uploaded,
        "warnings": record.warnings,
        "interfaces": interfaces,
    })))
}

async fn get_service_document(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let reg = st.registry.clone();
    let bytes = blocking(move || reg.service_document(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/xml")], bytes).into_response())
}

async fn upload_ontology(State(st): State<AppState>, req: Request) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let (source, bytes) = read_source(&st, req).await?;
    let reg = st.registry.clone();
    let (rec, created) = blocking(move || reg.add_ontology(&source, &bytes)).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((
        status,
        Json(json!({ "id": rec.id, "class_count": rec.class_count, "created": created })),
    ))
}

async fn list_ontologies(State(st): State<AppState>) -> ApiResult<Json<Vec<crate::OntologyRecord>>> {
    let reg = st.registry.clone();
    Ok(Json(blocking(move || reg.ontologies()).await?))
}

async fn ontology_classes(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<sawmatch_core::ontology::ClassTreeNode>>> {
    let reg = st.registry.clone();
    Ok(Json(blocking(move || reg.ontology_classes(&id)).await?))
}

#[derive(Debug, Deserialize)]
pub struct MatchRequest {
    pub collection_id: String,
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default)]
    pub sim_algorithm: Option<String>,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub rating_threshold: Option<f64>,
    #[serde(default)]
    pub query_name: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct MatchRow {
    pub service_id: String,
    pub service: String,
    pub interface: String,
    pub operation: String,
    pub rating: f64,
    pub tier: Tier,
    pub justifications: Vec<Justification>,
}

fn clamped(field: &str, value: Option<f64>, default: f64) -> Result<f64, RegistryError> {
    let v = value.unwrap_or(default);
    if !v.is_finite() {
        return Err(RegistryError::validation(field, "must be a finite number"));
    }
    Ok(v.clamp(API_MIN, API_MAX))
}

/// Validates a match request and turns it into a configuration and query.
pub fn match_config(req: &MatchRequest) -> Result<(MatchConfig, Query), RegistryError> {
    let strategy = match &req.strategy {
        Some(s) => Strategy::from_str(s).map_err(|e| RegistryError::validation("strategy", e.to_string()))?,
        None => Strategy::Hybrid,
    };
    let kind = match &req.sim_algorithm {
        Some(s) => SimKind::from_str(s).map_err(|e| RegistryError::validation("sim_algorithm", e.to_string()))?,
        None => SimKind::MongeElkan,
    };
    let defaults = MatchConfig::default();
    let cfg = MatchConfig {
        strategy,
        sim: SimAlgorithm::new(kind),
        weight: clamped("weight", req.weight, defaults.weight)?,
        rating_threshold: clamped("rating_threshold", req.rating_threshold, defaults.rating_threshold)?,
        ..defaults
    };
    let clean = |v: &[String]| -> Vec<String> {
        v.iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    };
    let mut query = Query::new(clean(&req.inputs), clean(&req.outputs));
    if query.requested_inputs.is_empty() && query.requested_outputs.is_empty() {
        return Err(RegistryError::validation(
            "inputs",
            "request at least one input or output concept",
        ));
    }
    query.query_name = req.query_name.clone().filter(|n| !n.trim().is_empty());
    Ok((cfg, query))
}

async fn run_match(
    State(st): State<AppState>,
    body: Result<Json<MatchRequest>, JsonRejection>,
) -> ApiResult<Json<Vec<MatchRow>>> {
    let Json(req) = body?;
    let (cfg, query) = match_config(&req)?;
    let reg = st.registry.clone();
    let results = blocking(move || reg.match_query(&req.collection_id, cfg, &query)).await?;
    Ok(Json(
        results
            .into_iter()
            .map(|r| MatchRow {
                service_id: r.service_id,
                service: r.service_name,
                interface: r.interface_name,
                operation: r.operation_name,
                rating: r.rating,
                tier: r.tier,
                justifications: r.justifications,
            })
            .collect(),
    ))
}
