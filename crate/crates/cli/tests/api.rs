use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value as JsonValue};
use tower::ServiceExt;

use loadwatch_cli::service::{router, AppState};
use loadwatch_core::evaluation::{confusion, roc, Cell, ExperimentConfig, ExperimentResult, RoundMetrics};
use loadwatch_core::fixture::{FixtureSpec, RawFixture};
use loadwatch_core::models::{train, ModelConfig, ModelKind};
use loadwatch_core::store::{FeatureGroup, FeatureStore, Value};
use loadwatch_core::windowing::{build_windows, WindowSpec};
use loadwatch_core::{Dataset, Model};

fn store() -> FeatureStore {
    let spec = FixtureSpec {
        players: 3,
        sessions: 45,
        injuries: 3,
        seed: 11,
        ..Default::default()
    };
    let f = RawFixture::generate(&spec);
    f.store(&f.options()).unwrap().0
}

fn model(store: &FeatureStore) -> Model {
    let spec = WindowSpec {
        n_in: 3,
        n_out: 3,
        groups: vec![FeatureGroup::W],
        ..Default::default()
    };
    let set = build_windows(store, &spec).unwrap();
    train(&Dataset::from_window_set(&set), &ModelConfig::new(ModelKind::Logit, 5)).unwrap()
}

fn experiment() -> ExperimentResult {
    let y = [0, 0, 1, 1, 0, 1];
    let scores = [0.1, 0.4, 0.35, 0.8, 0.2, 0.9];
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s > 0.5)).collect();
    let cm = confusion(&y, &predicted).unwrap();
    let curve = roc(&y, &scores).unwrap();
    let round = RoundMetrics {
        round: 0,
        confusion: cm,
        precision: cm.precision(),
        tpr: cm.tpr(),
        tnr: cm.tnr(),
        f1: cm.f1(),
        auc: curve.auc,
        roc: curve,
    };
    let cell = Cell {
        id: "I-1".into(),
        config: ExperimentConfig {
            data: "R+S".into(),
            event_proportion: 0.5,
            n_in: 3,
            n_out: 3,
            features: "W".into(),
            model: ModelKind::Logit,
            multiplier: 1.0,
            rounds: 1,
            seed: 42,
        },
    };
    ExperimentResult::from_rounds(&cell, vec![round])
}

struct Api {
    app: axum::Router,
    store: FeatureStore,
    model_id: String,
    model: Model,
}

fn api() -> Api {
    let store = store();
    let model = model(&store);
    let model_id = model.file_name().trim_end_matches(".json").to_string();
    let state = AppState {
        store: store.clone(),
        experiments: vec![experiment()],
        models: BTreeMap::from([(model_id.clone(), model.clone())]),
        threshold: 0.5,
    };
    Api {
        app: router(Arc::new(state)),
        store,
        model_id,
        model,
    }
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<JsonValue>) -> (StatusCode, JsonValue) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

/// Compares with `tests/golden/<name>.json`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &JsonValue) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(actual).unwrap() + "\n";
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &text).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(text, expected, "response differs from {}", path.display());
}

#[tokio::test]
async fn read_endpoints_match_golden_files() {
    let api = api();
    for (name, uri) in [
        ("players", "/players"),
        ("sessions_p1", "/sessions?player=p1&from=2021-01-10&to=2021-02-10"),
        ("features_acwr_p1", "/features/acwr?player=p1"),
        ("injuries", "/injuries"),
        ("injuries_p2", "/injuries?player=p2"),
        ("experiments", "/experiments"),
        ("experiment_i1", "/experiments/I-1"),
    ] {
        let (status, body) = call(&api.app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::OK, "{uri}: {body}");
        golden(name, &body);
    }
}

#[tokio::test]
async fn errors_name_the_problem() {
    let api = api();
    for (uri, status, needle) in [
        ("/features/acwr?player=p9", StatusCode::NOT_FOUND, "unknown player p9"),
        ("/features/nope?player=p1", StatusCode::NOT_FOUND, "unknown feature nope"),
        ("/features/acwr", StatusCode::BAD_REQUEST, "player"),
        ("/sessions?from=2021-13-01", StatusCode::BAD_REQUEST, "from"),
        ("/injuries?player=zz", StatusCode::NOT_FOUND, "unknown player zz"),
        ("/experiments/I-9", StatusCode::NOT_FOUND, "unknown experiment I-9"),
    ] {
        let (got, body) = call(&api.app, "GET", uri, None).await;
        assert_eq!(got, status, "{uri}");
        assert!(body["error"].as_str().unwrap().contains(needle), "{uri}: {body}");
    }
}

#[tokio::test]
async fn feature_series_is_the_store_column() {
    let api = api();
    let (_, body) = call(&api.app, "GET", "/features/acwr?player=p1", None).await;
    let idx = api.store.catalog.index_of("acwr").unwrap();
    let expected: Vec<JsonValue> = api
        .store
        .records
        .iter()
        .filter(|r| r.player.as_str() == "p1")
        .map(|r| match r.values[idx] {
            Value::Number(v) => json!({"date": r.date.to_string(), "value": v}),
            Value::Category(_) => unreachable!(),
        })
        .collect();
    assert_eq!(body["series"], json!(expected));
    let injured: Vec<String> = api
        .store
        .injury_events()
        .iter()
        .filter(|e| e.player.as_str() == "p1")
        .map(|e| e.date.to_string())
        .collect();
    assert_eq!(body["injury_dates"], json!(injured));
}

fn sessions_of(api: &Api, player: &str, n: usize) -> Vec<JsonValue> {
    let features: Vec<String> = api
        .model
        .feature_names
        .iter()
        .step_by(api.model.n_steps)
        .map(|s| s.trim_end_matches("_1").to_string())
        .collect();
    let rows: Vec<_> = api.store.records.iter().filter(|r| r.player.as_str() == player).collect();
    rows[rows.len() - n..]
        .iter()
        .map(|r| {
            let map: serde_json::Map<String, JsonValue> = features
                .iter()
                .map(|f| (f.clone(), json!(api.store.value(r, f).unwrap().number().unwrap())))
                .collect();
            JsonValue::Object(map)
        })
        .collect()
}

#[tokio::test]
async fn predict_scores_like_the_model() {
    let api = api();
    let sessions = sessions_of(&api, "p1", 3);
    let (status, body) = call(
        &api.app,
        "POST",
        "/predict",
        Some(json!({"model_id": api.model_id, "sessions": sessions})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");

    // flatten feature-major by hand
    let n = 3;
    let names: Vec<&str> = api.model.feature_names.iter().step_by(n).map(|s| s.trim_end_matches("_1")).collect();
    let mut x = Vec::new();
    for f in &names {
        for s in &sessions {
            x.push(s[*f].as_f64().unwrap());
        }
    }
    let score = api.model.score(&x).unwrap();
    assert_eq!(body["score"].as_f64().unwrap(), score);
    assert_eq!(body["class"], json!(u8::from(score > 0.5)));
    assert_eq!(body["threshold"], json!(0.5));

    let (_, body) = call(
        &api.app,
        "POST",
        "/predict",
        Some(json!({"model_id": api.model_id, "sessions": sessions, "threshold": 0.0})),
    )
    .await;
    assert_eq!(body["class"], json!(1));
}

#[tokio::test]
async fn predict_rejects_bad_requests() {
    let api = api();
    let two = sessions_of(&api, "p1", 2);
    let three = sessions_of(&api, "p1", 3);
    let mut holed = three.clone();
    holed[1].as_object_mut().unwrap().remove("fatigue");
    let cases = [
        (json!({"sessions": three}), StatusCode::BAD_REQUEST, "model_id"),
        (json!({"model_id": api.model_id}), StatusCode::BAD_REQUEST, "sessions"),
        (json!({"model_id": "model_x", "sessions": three}), StatusCode::NOT_FOUND, "unknown model model_x"),
        (json!({"model_id": api.model_id, "sessions": two}), StatusCode::UNPROCESSABLE_ENTITY, "expects 3 sessions, got 2"),
        (json!({"model_id": api.model_id, "sessions": holed}), StatusCode::BAD_REQUEST, "sessions[1].fatigue"),
        (json!({"model_id": api.model_id, "sessions": three, "threshold": 2}), StatusCode::BAD_REQUEST, "threshold"),
        (json!([1, 2]), StatusCode::BAD_REQUEST, "JSON object"),
    ];
    for (body, status, needle) in cases {
        let (got, resp) = call(&api.app, "POST", "/predict", Some(body.clone())).await;
        assert_eq!(got, status, "{body}");
        assert!(resp["error"].as_str().unwrap().contains(needle), "{resp}");
    }
    let (got, list) = call(&api.app, "GET", "/models", None).await;
    assert_eq!(got, StatusCode::OK);
    assert_eq!(list[0]["id"], json!(api.model_id));
    assert_eq!(list[0]["n_in"], json!(3));
}

#[tokio::test]
async fn catalog_lists_every_store_column() {
    let api = api();
    let (_, body) = call(&api.app, "GET", "/catalog", None).await;
    assert_eq!(body.as_array().unwrap().len(), api.store.catalog.len());
    assert_eq!(body[0]["name"], json!(api.store.catalog.features()[0].name));
}
