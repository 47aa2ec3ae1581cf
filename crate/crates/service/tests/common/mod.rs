#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use faircompass_service::{router, AppState, ServiceConfig};

pub fn config(store: &std::path::Path) -> ServiceConfig {
    ServiceConfig {
        store_path: store.to_path_buf(),
        ..ServiceConfig::default()
    }
}

pub fn app(config: ServiceConfig) -> (Arc<AppState>, Router) {
    let state = Arc::new(AppState::open(config).unwrap());
    let router = router(state.clone());
    (state, router)
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call_text(app, method, uri, body).await;
    let value = if text.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(Value::String(text))
    };
    (status, value)
}

pub async fn call_text(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

/// Exec-managerial rows with 100 positives and 100 negatives per sex.
/// Men: 30 false negatives, 10 false positives. Women: 5 and 30. The
/// female group therefore has an FNR 0.25 lower and an FPR 0.20 higher.
/// A handful of other rows keep the dataset from being a single stratum.
pub fn exec_csv() -> String {
    let mut csv = String::from("sex,occupation,hours,y,yhat\n");
    let mut push = |sex: &str, occ: &str, hours: u32, y: u8, yhat: u8, n: usize| {
        for _ in 0..n {
            csv.push_str(&format!("{sex},{occ},{hours},{y},{yhat}\n"));
        }
    };
    push("Male", "Exec-managerial", 40, 1, 1, 70);
    push("Male", "Exec-managerial", 50, 1, 0, 30);
    push("Male", "Exec-managerial", 40, 0, 0, 90);
    push("Male", "Exec-managerial", 45, 0, 1, 10);
    push("Female", "Exec-managerial", 40, 1, 1, 95);
    push("Female", "Exec-managerial", 45, 1, 0, 5);
    push("Female", "Exec-managerial", 40, 0, 0, 70);
    push("Female", "Exec-managerial", 50, 0, 1, 30);
    push("Male", "Sales", 40, 1, 1, 25);
    push("Male", "Sales", 40, 0, 0, 25);
    push("Female", "Sales", 40, 1, 0, 10);
    push("Female", "Sales", 45, 0, 0, 30);
    csv
}

pub fn exec_upload() -> Value {
    json!({
        "csv": exec_csv(),
        "config": {"label_column": "y", "prediction_column": "yhat", "numeric_columns": ["hours"],
                   "bins": {"hours": {"strategy": "explicit", "edges": [40, 41, 45, 46, 50]}}}
    })
}

/// Upload the Exec fixture and open a session on it.
pub async fn exec_session(app: &Router, id: &str) -> String {
    let (status, ds) = post(app, "/api/v1/datasets", exec_upload()).await;
    assert!(status.is_success(), "{ds}");
    let dataset_id = ds["dataset_id"].as_str().unwrap().to_string();
    let (status, body) = post(
        app,
        "/api/v1/sessions",
        json!({"dataset_id": dataset_id, "id": id}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    dataset_id
}

pub fn id_of(groups: &Value, name: &str) -> String {
    groups["subgroups"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["display_name"] == name)
        .unwrap_or_else(|| panic!("no subgroup {name} in {groups}"))["id"]
        .as_str()
        .unwrap()
        .to_string()
}
