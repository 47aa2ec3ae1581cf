//! The HTTP service over the Adult fixture: reads never change a session,
//! and a restarted service replays every session to an identical state.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use faircompass_service::{router, AppState, ServiceConfig};

use crate::{adult_config, ensure, workspace_path, Outcome, ADULT_CSV};

const SESSION: &str = "acceptance";

struct Client {
    app: Router,
}

impl Client {
    fn open(store: &std::path::Path) -> Result<(Arc<AppState>, Self), String> {
        let config = ServiceConfig {
            store_path: store.to_path_buf(),
            ..ServiceConfig::default()
        };
        let state = Arc::new(AppState::open(config).map_err(|e| format!("open: {e}"))?);
        let app = router(state.clone());
        Ok((state, Self { app }))
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> Result<String, String> {
        let builder = Request::builder().method(method).uri(uri);
        let request = match body {
            Some(b) => builder
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => builder.body(Body::empty()),
        }
        .map_err(|e| e.to_string())?;
        let response = self
            .app
            .clone()
            .oneshot(request)
            .await
            .map_err(|e| e.to_string())?;
        let status = response.status();
        let bytes = response
            .into_body()
            .collect()
            .await
            .map_err(|e| e.to_string())?
            .to_bytes();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        ensure!(status.is_success(), "{uri}: {status} {text}");
        Ok(text)
    }

    async fn get(&self, uri: &str) -> Result<String, String> {
        self.call(Method::GET, uri, None).await
    }

    async fn post(&self, uri: &str, body: Value) -> Result<Value, String> {
        let text = self.call(Method::POST, uri, Some(body)).await?;
        serde_json::from_str(&text).map_err(|e| format!("{uri}: {e}"))
    }
}

fn session_uri(rest: &str) -> String {
    match rest {
        "" => format!("/api/v1/sessions/{SESSION}"),
        _ => format!("/api/v1/sessions/{SESSION}/{rest}"),
    }
}

fn id_of(groups: &Value, name: &str) -> Result<String, String> {
    groups["subgroups"]
        .as_array()
        .and_then(|all| all.iter().find(|g| g["display_name"] == name))
        .and_then(|g| g["id"].as_str())
        .map(String::from)
        .ok_or_else(|| format!("no subgroup {name}"))
}

async fn script(client: &Client) -> Result<(), String> {
    let csv = std::fs::read_to_string(workspace_path(ADULT_CSV)).map_err(|e| e.to_string())?;
    let upload = client
        .post(
            "/api/v1/datasets",
            json!({"csv": csv, "config": adult_config(true)}),
        )
        .await?;
    let dataset_id = upload["dataset_id"].as_str().ok_or("upload returned no id")?;
    client
        .post(
            "/api/v1/sessions",
            json!({"dataset_id": dataset_id, "id": SESSION}),
        )
        .await?;
    let groups = client
        .post(
            &session_uri("groups"),
            json!({"selections": [{"feature": "sex"}, {"feature": "occupation"}]}),
        )
        .await?;
    client
        .post(
            &session_uri("pin"),
            json!({"subgroup_id": id_of(&groups, "Male, Exec-managerial")?}),
        )
        .await?;
    client
        .post(&session_uri("group-sets"), json!({"name": "sex x occupation"}))
        .await?;
    for (node, answer) in [
        ("policy", "No"),
        ("equal_base_rates", "No, but should be"),
        ("explaining_variables", "Yes"),
    ] {
        client
            .post(
                &session_uri("navigate"),
                json!({"node_id": node, "answer": answer}),
            )
            .await?;
    }
    client
        .post(
            &session_uri("evaluate"),
            json!({"favourable_class": 0, "sensitive_attribute": "sex"}),
        )
        .await?;
    let groups = client
        .post(
            &session_uri("groups"),
            json!({"selections": [{"feature": "sex"}, {"feature": "hours-per-week", "values": ["40", "45", "50"]}],
                   "stage": "exploration"}),
        )
        .await?;
    client
        .post(
            &session_uri("pin"),
            json!({"subgroup_id": id_of(&groups, "Male, 40")?}),
        )
        .await?;
    client
        .post(
            &session_uri("evaluate"),
            json!({"favourable_class": 0, "sensitive_attribute": "sex"}),
        )
        .await?;
    Ok(())
}

/// Every read endpoint, with the queries a client would send.
fn reads(pinned: &str) -> Vec<String> {
    vec![
        session_uri(""),
        session_uri("metrics"),
        session_uri("metrics?rates=fnr,fpr"),
        session_uri(&format!("compare?hovered={pinned}")),
        session_uri("suggestions?seed=42"),
        session_uri(&format!("similar?target={pinned}")),
        session_uri("log"),
        session_uri("report"),
        session_uri("report?format=json"),
    ]
}

async fn state_hash(client: &Client) -> Result<String, String> {
    let view: Value =
        serde_json::from_str(&client.get(&session_uri("")).await?).map_err(|e| e.to_string())?;
    view["state_hash"]
        .as_str()
        .map(String::from)
        .ok_or("no state_hash".into())
}

async fn run() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (state, client) = Client::open(dir.path())?;
    script(&client).await?;
    let before = state.snapshot(SESSION).map_err(|e| e.to_string())?;
    let pinned = before.pinned().map(|g| g.id.clone()).ok_or("nothing pinned")?;

    let hash = state_hash(&client).await?;
    let mut first = Vec::new();
    for uri in reads(&pinned) {
        first.push(client.get(&uri).await?);
    }
    for (uri, body) in reads(&pinned).iter().zip(&first) {
        let again = client.get(uri).await?;
        ensure!(again == *body, "{uri} answered differently the second time");
    }
    ensure!(state_hash(&client).await? == hash, "reads changed the state hash");
    ensure!(
        state.snapshot(SESSION).map_err(|e| e.to_string())? == before,
        "reads changed the session"
    );
    let events = before.events().len();
    drop(client);
    drop(state);

    let (state, client) = Client::open(dir.path())?;
    let after = state.snapshot(SESSION).map_err(|e| e.to_string())?;
    ensure!(after == before, "replayed session differs");
    ensure!(after.state_hash() == hash, "replayed state hash differs");
    for (uri, body) in reads(&pinned).iter().zip(&first) {
        let replayed = client.get(uri).await?;
        ensure!(replayed == *body, "{uri} differs after restart");
    }
    Ok(format!(
        "{events} events replayed; {} reads identical before and after restart",
        first.len()
    ))
}

pub fn check() -> Outcome {
    tokio::runtime::Builder::new_current_thread()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(run())
}
