mod common;

use std::io::Write;

use serde_json::json;

use common::*;
use faircompass_service::{AppState, ServiceError};

async fn ok(
    call: impl std::future::Future<Output = (axum::http::StatusCode, serde_json::Value)>,
) -> serde_json::Value {
    let (status, body) = call.await;
    assert!(status.is_success(), "{status}: {body}");
    body
}

async fn scripted_session(app: &axum::Router) {
    exec_session(app, "walk").await;
    let groups = ok(post(
        app,
        "/api/v1/sessions/walk/groups",
        json!({"selections": [{"feature": "sex"}, {"feature": "occupation"}], "note": "first look"}),
    ))
    .await;
    ok(post(
        app,
        "/api/v1/sessions/walk/group-sets",
        json!({"name": "sex x occupation"}),
    ))
    .await;
    ok(post(
        app,
        "/api/v1/sessions/walk/pin",
        json!({"subgroup_id": id_of(&groups, "Male, Exec-managerial")}),
    ))
    .await;
    for (node, answer) in [
        ("policy", "No"),
        ("equal_base_rates", "No, but should be"),
        ("explaining_variables", "Yes"),
    ] {
        ok(post(
            app,
            "/api/v1/sessions/walk/navigate",
            json!({"node_id": node, "answer": answer}),
        ))
        .await;
    }
    ok(post(
        app,
        "/api/v1/sessions/walk/evaluate",
        json!({"favourable_class": 0, "sensitive_attribute": "sex", "min_stratum_size": 5, "stage": "informed_analysis"}),
    ))
    .await;
    ok(post(
        app,
        "/api/v1/sessions/walk/groups",
        json!({"selections": [{"feature": "sex"}, {"feature": "hours", "values": ["40", "45"]}], "stage": "exploration"}),
    ))
    .await;
    ok(post(
        app,
        "/api/v1/sessions/walk/log",
        json!({"stage": "informed_analysis", "action": "comment", "payload": 0.1}),
    ))
    .await;
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(config(dir.path()));
    scripted_session(&app).await;
    let before = state.snapshot("walk").unwrap();
    let (_, report_before) = call_text(
        &app,
        axum::http::Method::GET,
        "/api/v1/sessions/walk/report",
        None,
    )
    .await;
    let (_, metrics_before) = get(&app, "/api/v1/sessions/walk/metrics").await;
    drop(app);
    drop(state);

    let (state, app) = common::app(config(dir.path()));
    assert_eq!(state.session_ids(), ["walk"]);
    let after = state.snapshot("walk").unwrap();
    assert_eq!(after, before);
    assert_eq!(after.state_hash(), before.state_hash());
    assert_eq!(after.events().len(), 9);

    // The dataset is reloaded from the store on first use.
    let (_, report_after) = call_text(
        &app,
        axum::http::Method::GET,
        "/api/v1/sessions/walk/report",
        None,
    )
    .await;
    assert_eq!(report_after, report_before);
    let (_, metrics_after) = get(&app, "/api/v1/sessions/walk/metrics").await;
    assert_eq!(metrics_after, metrics_before);

    // Work continues where it left off.
    let (status, _) = post(&app, "/api/v1/sessions/walk/backtrack", json!({"steps": 3})).await;
    assert!(status.is_success());
    assert_eq!(state.snapshot("walk").unwrap().events().last().unwrap().seq, 10);
}

#[tokio::test]
async fn failed_commands_leave_no_trace_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(config(dir.path()));
    exec_session(&app, "s").await;
    post(
        &app,
        "/api/v1/sessions/s/groups",
        json!({"selections": [{"feature": "sex"}]}),
    )
    .await;
    post(
        &app,
        "/api/v1/sessions/s/pin",
        json!({"subgroup_id": "sg-missing"}),
    )
    .await;
    post(&app, "/api/v1/sessions/s/backtrack", json!({})).await;
    let file = std::fs::read_to_string(dir.path().join("sessions/s.jsonl")).unwrap();
    assert_eq!(file.lines().count(), 2);
    assert_eq!(state.snapshot("s").unwrap().events().len(), 1);
}

#[tokio::test]
async fn corrupt_logs_refuse_to_load() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(config(dir.path()));
    exec_session(&app, "s").await;
    post(
        &app,
        "/api/v1/sessions/s/groups",
        json!({"selections": [{"feature": "sex"}]}),
    )
    .await;
    drop(app);

    let path = dir.path().join("sessions/s.jsonl");
    let mut file = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    writeln!(file, "{{\"seq\": 7}}").unwrap();
    match AppState::open(config(dir.path())) {
        Err(ServiceError::Core(e)) => assert_eq!(e.kind(), "CorruptRecord"),
        Err(other) => panic!("unexpected error {other}"),
        Ok(_) => panic!("corrupt log loaded"),
    }
}
