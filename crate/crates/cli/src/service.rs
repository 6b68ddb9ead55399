//! Read-only HTTP API over the feature store, grid results and saved models.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Serialize;
use serde_json::{json, Value as JsonValue};

use loadwatch_core::evaluation::{ExperimentResult, Summary};
use loadwatch_core::ingest::{InjuryEvent, PlayerId};
use loadwatch_core::store::{FeatureDef, FeatureStore, Value};
use loadwatch_core::Model;

use crate::CliError;

pub struct AppState {
    pub store: FeatureStore,
    pub experiments: Vec<ExperimentResult>,
    /// Keyed by file stem, e.g. `model_logit_0123456789abcdef`.
    pub models: BTreeMap<String, Model>,
    pub threshold: f64,
}

/// Loads every `model_*.json` in `dir`; a missing dir means no models.
pub fn load_models(dir: &Path) -> Result<BTreeMap<String, Model>, CliError> {
    let mut models = BTreeMap::new();
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(models);
    };
    for entry in entries {
        let path = entry.map_err(|e| CliError::Stage(e.to_string()))?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        if name.starts_with("model_") && name.ends_with(".json") {
            let model = Model::load(&path).map_err(|e| CliError::Stage(e.to_string()))?;
            let id = path.file_stem().expect("file name").to_string_lossy().into_owned();
            models.insert(id, model);
        }
    }
    Ok(models)
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn not_found(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, msg.into())
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Params = Query<HashMap<String, String>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/players", get(players))
        .route("/sessions", get(sessions))
        .route("/catalog", get(catalog))
        .route("/features/{name}", get(feature_series))
        .route("/injuries", get(injuries))
        .route("/experiments", get(experiments))
        .route("/experiments/{id}", get(experiment))
        .route("/models", get(models))
        .route("/predict", post(predict))
        .with_state(state)
}

fn player_param(state: &AppState, q: &HashMap<String, String>, required: bool) -> Result<Option<PlayerId>, ApiError> {
    let Some(raw) = q.get("player") else {
        return if required {
            Err(bad_request("missing query parameter player"))
        } else {
            Ok(None)
        };
    };
    let id = PlayerId::new(raw.as_str()).map_err(|_| bad_request("player must not be empty"))?;
    if !state.store.players().contains(&id) {
        return Err(not_found(format!("unknown player {raw}")));
    }
    Ok(Some(id))
}

fn date_param(q: &HashMap<String, String>, key: &str) -> Result<Option<NaiveDate>, ApiError> {
    q.get(key)
        .map(|s| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| bad_request(format!("{key} must be a YYYY-MM-DD date")))
        })
        .transpose()
}

async fn players(State(s): State<Arc<AppState>>) -> Json<Vec<PlayerId>> {
    Json(s.store.players())
}

#[derive(Serialize)]
struct SessionRow {
    player: PlayerId,
    date: NaiveDate,
    session_type: &'static str,
    injury: bool,
}

async fn sessions(State(s): State<Arc<AppState>>, Query(q): Params) -> ApiResult<Vec<SessionRow>> {
    let player = player_param(&s, &q, false)?;
    let from = date_param(&q, "from")?;
    let to = date_param(&q, "to")?;
    let rows = s
        .store
        .records
        .iter()
        .filter(|r| player.as_ref().is_none_or(|p| &r.player == p))
        .filter(|r| from.is_none_or(|d| r.date >= d) && to.is_none_or(|d| r.date <= d))
        .map(|r| SessionRow {
            player: r.player.clone(),
            date: r.date,
            session_type: r.session_type.as_str(),
            injury: r.injury,
        })
        .collect();
    Ok(Json(rows))
}

async fn catalog(State(s): State<Arc<AppState>>) -> Json<Vec<FeatureDef>> {
    Json(s.store.catalog.features().to_vec())
}

async fn feature_series(
    State(s): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
    Query(q): Params,
) -> ApiResult<JsonValue> {
    let idx = s
        .store
        .catalog
        .index_of(&name)
        .ok_or_else(|| not_found(format!("unknown feature {name}")))?;
    let player = player_param(&s, &q, true)?.expect("required");
    let series: Vec<JsonValue> = s
        .store
        .records_of(&player)
        .map(|r| {
            let value = match &r.values[idx] {
                Value::Number(v) => json!(v),
                Value::Category(c) => json!(c),
            };
            json!({"date": r.date, "value": value})
        })
        .collect();
    let injury_dates: Vec<NaiveDate> = s
        .store
        .injury_events()
        .into_iter()
        .filter(|e| e.player == player)
        .map(|e| e.date)
        .collect();
    Ok(Json(json!({
        "feature": name,
        "player": player,
        "series": series,
        "injury_dates": injury_dates,
    })))
}

async fn injuries(State(s): State<Arc<AppState>>, Query(q): Params) -> ApiResult<Vec<InjuryEvent>> {
    let player = player_param(&s, &q, false)?;
    let events = s
        .store
        .injury_events()
        .into_iter()
        .filter(|e| player.as_ref().is_none_or(|p| &e.player == p))
        .collect();
    Ok(Json(events))
}

#[derive(Serialize)]
struct ExperimentRow<'a> {
    id: &'a str,
    config: &'a loadwatch_core::evaluation::ExperimentConfig,
    precision: Option<Summary>,
    tpr: Option<Summary>,
    tnr: Option<Summary>,
    f1: Option<Summary>,
    auc: Option<Summary>,
    error: Option<&'a str>,
}

async fn experiments(State(s): State<Arc<AppState>>) -> Json<JsonValue> {
    let rows: Vec<ExperimentRow> = s
        .experiments
        .iter()
        .map(|r| ExperimentRow {
            id: &r.id,
            config: &r.config,
            precision: r.precision,
            tpr: r.tpr,
            tnr: r.tnr,
            f1: r.f1,
            auc: r.auc,
            error: r.error.as_deref(),
        })
        .collect();
    Json(serde_json::to_value(rows).expect("rows serialize"))
}

async fn experiment(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<ExperimentResult> {
    s.experiments
        .iter()
        .find(|r| r.id == id)
        .cloned()
        .map(Json)
        .ok_or_else(|| not_found(format!("unknown experiment {id}")))
}

/// Per-session feature names of a model: its flattened columns are
/// `<feature>_<position>`, grouped by feature.
fn base_features(model: &Model) -> Vec<String> {
    model
        .feature_names
        .iter()
        .step_by(model.n_steps.max(1))
        .map(|n| n.strip_suffix("_1").unwrap_or(n).to_string())
        .collect()
}

async fn models(State(s): State<Arc<AppState>>) -> Json<JsonValue> {
    let list: Vec<JsonValue> = s
        .models
        .iter()
        .map(|(id, m)| json!({"id": id, "kind": m.kind(), "n_in": m.n_steps, "features": base_features(m)}))
        .collect();
    Json(json!(list))
}

async fn predict(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<JsonValue> {
    let body: JsonValue = serde_json::from_slice(&body).map_err(|e| bad_request(format!("body is not valid JSON: {e}")))?;
    let obj = body.as_object().ok_or_else(|| bad_request("body must be a JSON object"))?;
    let model_id = obj
        .get("model_id")
        .and_then(JsonValue::as_str)
        .ok_or_else(|| bad_request("model_id must be a string"))?;
    let sessions = obj
        .get("sessions")
        .and_then(JsonValue::as_array)
        .ok_or_else(|| bad_request("sessions must be an array of feature objects"))?;
    let threshold = match obj.get("threshold") {
        None => s.threshold,
        Some(t) => t
            .as_f64()
            .filter(|t| (0.0..=1.0).contains(t))
            .ok_or_else(|| bad_request("threshold must be a number in [0, 1]"))?,
    };
    let model = s
        .models
        .get(model_id)
        .ok_or_else(|| not_found(format!("unknown model {model_id}")))?;
    let n = model.n_steps;
    if sessions.len() != n {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("model {model_id} expects {n} sessions, got {}", sessions.len()),
        ));
    }
    let names = base_features(model);
    let mut x = vec![0.0; names.len() * n];
    for (t, session) in sessions.iter().enumerate() {
        let map = session
            .as_object()
            .ok_or_else(|| bad_request(format!("sessions[{t}] must be an object")))?;
        for (f, name) in names.iter().enumerate() {
            x[f * n + t] = map
                .get(name)
                .and_then(JsonValue::as_f64)
                .ok_or_else(|| bad_request(format!("sessions[{t}].{name} must be a number")))?;
        }
    }
    let score = model.score(&x).map_err(|e| bad_request(e.to_string()))?;
    let class = loadwatch_core::models::classify_score(score, threshold);
    Ok(Json(json!({"score": score, "class": class, "threshold": threshold})))
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: AppState, host: &str, port: u16) -> Result<(), CliError> {
    let addr = format!("{host}:{port}");
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| CliError::Stage(format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(Arc::new(state)))
        .await
        .map_err(|e| CliError::Stage(e.to_string()))
}
