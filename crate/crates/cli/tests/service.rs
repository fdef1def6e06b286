//! HTTP service surface.

mod common;

use common::{spawn_server, Workspace};

#[test]
fn healthz_reports_ok_with_loaded_artifacts() {
    let ws = Workspace::new();
    ws.ingest_and_index();
    let (_guard, base) = spawn_server(&ws);
    let reply: serde_json::Value = ureq::get(&format!("{base}/healthz"))
        .call()
        .unwrap()
        .into_json()
        .unwrap();
    assert_eq!(reply["status"], "ok");
    assert_eq!(reply["artifacts_loaded"], true);
    assert!(reply["versions"].is_object());
}

#[test]
fn query_endpoint_matches_cli_evidence() {
    let ws = Workspace::new();
    ws.ingest_and_index();

    let stdout = ws.run_ok(&["ask", "wheat rust control", "--no-llm", "--json", "--k", "6"]);
    let cli: serde_json::Value = serde_json::from_str(&stdout).unwrap();

    let (_guard, base) = spawn_server(&ws);
    let http: serde_json::Value = ureq::post(&format!("{base}/v1/query"))
        .send_json(serde_json::json!({"query": "wheat rust control", "k": 6}))
        .unwrap()
        .into_json()
        .unwrap();

    assert_eq!(cli["evidence"], http["evidence"], "cross-surface evidence equality");
}

#[test]
fn ask_endpoint_returns_answer_with_evidence_and_timings() {
    let ws = Workspace::new();
    ws.ingest_and_index();
    let (_guard, base) = spawn_server(&ws);
    let reply: serde_json::Value = ureq::post(&format!("{base}/v1/ask"))
        .send_json(serde_json::json!({"query": "how to schedule drip irrigation"}))
        .unwrap()
        .into_json()
        .unwrap();
    assert!(reply["answer"].is_string());
    assert!(!reply["evidence"].as_array().unwrap().is_empty());
    assert!(reply["timings"].is_object());
}

#[test]
fn malformed_body_gets_400_with_detail() {
    let ws = Workspace::new();
    ws.ingest_and_index();
    let (_guard, base) = spawn_server(&ws);
    let response = ureq::post(&format!("{base}/v1/query"))
        .set("Content-Type", "application/json")
        .send_string("{not json");
    match response {
        Err(ureq::Error::Status(code, resp)) => {
            assert_eq!(code, 400);
            let body: serde_json::Value = resp.into_json().unwrap();
            assert!(body["error"].is_string());
        }
        other => panic!("expected 400, got {other:?}"),
    }

    // Wrong shape (missing "query") is also a 400.
    let response = ureq::post(&format!("{base}/v1/query"))
        .send_json(serde_json::json!({"k": 3}));
    match response {
        Err(ureq::Error::Status(code, _)) => assert_eq!(code, 400),
        other => panic!("expected 400, got {other:?}"),
    }
}

#[test]
fn missing_artifacts_yield_503() {
    let ws = Workspace::new(); // nothing ingested or indexed
    let (_guard, base) = spawn_server(&ws);

    let health: serde_json::Value = ureq::get(&format!("{base}/healthz"))
        .call()
        .unwrap()
        .into_json()
        .unwrap();
    assert_eq!(health["artifacts_loaded"], false);
    assert_eq!(health["status"], "degraded");

    let response = ureq::post(&format!("{base}/v1/query"))
        .send_json(serde_json::json!({"query": "anything"}));
    match response {
        Err(ureq::Error::Status(code, _)) => assert_eq!(code, 503),
        other => panic!("expected 503, got {other:?}"),
    }
}
