use std::collections::HashSet;
use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use scattermesh_core::corpus::{Corpus, DocumentRecord};
use scattermesh_core::synth::{planted_dataset, topic_words, SynthParams};
use scattermesh_service::{router, AppState, ServiceConfig};

fn params() -> SynthParams {
    SynthParams {
        docs_per_topic: 40,
        ..SynthParams::default()
    }
}

/// Writes the planted corpus and its truth sidecar into `dir`.
fn write_planted(dir: &Path) -> std::path::PathBuf {
    let data = planted_dataset(&params()).unwrap();
    let path = dir.join("planted.jsonl");
    data.corpus().write_jsonl(&path).unwrap();
    data.write_truth(&dir.join("planted.truth.csv")).unwrap();
    path
}

fn app(dir: &Path) -> Router {
    router(
        AppState::open(ServiceConfig {
            corpus_dir: Some(dir.to_path_buf()),
            state_dir: Some(dir.join("state")),
            ui_dir: None,
        })
        .unwrap(),
    )
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn open_session(app: &Router, path: &str) -> Value {
    let (status, corpus) = call(app, "POST", "/api/corpora", Some(json!({ "path": path }))).await;
    assert_eq!(status, StatusCode::OK, "{corpus}");
    let (status, session) =
        call(app, "POST", "/api/sessions", Some(json!({ "corpus_id": corpus["corpus_id"] }))).await;
    assert_eq!(status, StatusCode::OK, "{session}");
    session
}

fn sizes(view: &Value) -> Vec<u64> {
    view["clusters"].as_array().unwrap().iter().map(|c| c["size"].as_u64().unwrap()).collect()
}

#[tokio::test]
async fn create_scatters_planted_topics() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path());
    let app = app(dir.path());
    let (status, corpus) = call(&app, "POST", "/api/corpora", Some(json!({ "path": "planted.jsonl" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(corpus["documents"], 160);
    assert_eq!(corpus["labeled"], true);
    let (_, view) = call(&app, "POST", "/api/sessions", Some(json!({ "corpus_id": corpus["corpus_id"] }))).await;

    let keys: HashSet<&str> = view.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, HashSet::from(["session_id", "generation", "clusters", "metrics", "history_depth"]));
    assert_eq!(view["generation"], 1);
    assert_eq!(view["history_depth"], 0);
    assert_eq!(sizes(&view).iter().sum::<u64>(), 160);
    assert!(view["metrics"]["ami"].as_f64().unwrap() > 0.9, "{}", view["metrics"]);

    let planted: HashSet<String> = (0..4).flat_map(|t| topic_words(t, params().topic_vocab)).collect();
    for c in view["clusters"].as_array().unwrap() {
        let top = c["descriptors"][0]["term"].as_str().unwrap();
        assert!(planted.contains(top), "cluster {} leads with {top}", c["id"]);
        assert!(c["samples"].as_array().unwrap().len() <= 5);
    }
}

#[tokio::test]
async fn gather_then_back_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path());
    let app = app(dir.path());
    let first = open_session(&app, "planted.jsonl").await;
    let id = first["session_id"].as_str().unwrap().to_string();
    let picked = sizes(&first)[0] + sizes(&first)[1];

    let (status, second) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/gather"),
        Some(json!({ "clusters": [0, 1], "k": 2, "generation": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{second}");
    assert_eq!(second["generation"], 2);
    assert_eq!(second["history_depth"], 1);
    assert_eq!(sizes(&second).len(), 2);
    assert_eq!(sizes(&second).iter().sum::<u64>(), picked);

    let (status, restored) = call(&app, "POST", &format!("/api/sessions/{id}/back"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(restored, first);

    let (status, again) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/gather"),
        Some(json!({ "clusters": [2] })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["generation"], 3, "generations are never reused");
}

#[tokio::test]
async fn rejected_requests_leave_state_alone() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path());
    let app = app(dir.path());
    let first = open_session(&app, "planted.jsonl").await;
    let id = first["session_id"].as_str().unwrap().to_string();
    let gather = format!("/api/sessions/{id}/gather");

    let (status, body) = call(&app, "POST", &format!("/api/sessions/{id}/back"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].is_string());

    let (status, _) = call(&app, "POST", &gather, Some(json!({ "clusters": [] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = call(&app, "POST", &gather, Some(json!({ "clusters": [0], "generation": 7 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("generation 1"));

    let (status, _) = call(&app, "POST", &gather, Some(json!({ "clusters": [9] }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, _) = call(&app, "POST", &gather, Some(json!({ "clusters": [0], "k": 500 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, _) = call(&app, "POST", &gather, Some(json!("not an object"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, now) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(now, first);
}

#[tokio::test]
async fn lookups_and_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path());
    let app = app(dir.path());
    let first = open_session(&app, "planted.jsonl").await;
    let id = first["session_id"].as_str().unwrap();

    let (status, doc) = call(&app, "GET", &format!("/api/sessions/{id}/documents/doc-0001"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["id"], "doc-0001");
    assert_eq!(doc["class"], "Planted Topic 2");
    assert!(doc["cluster"].is_u64());
    assert!(doc["abstract"].is_string());

    let (status, proj) = call(&app, "GET", &format!("/api/sessions/{id}/projection"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(proj["points"].as_array().unwrap().len(), 160);

    for uri in [
        format!("/api/sessions/{id}/documents/nope"),
        "/api/sessions/nope".to_string(),
        "/api/nothing".to_string(),
    ] {
        let (status, body) = call(&app, "GET", &uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(body["error"].is_string());
    }
    let (status, _) = call(&app, "POST", "/api/sessions", Some(json!({ "corpus_id": "nope" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/api/corpora", Some(json!({ "path": "../../etc/passwd" }))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn gathered_document_outside_active_set_has_no_cluster() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path());
    let app = app(dir.path());
    let first = open_session(&app, "planted.jsonl").await;
    let id = first["session_id"].as_str().unwrap();
    let (_, doc) = call(&app, "GET", &format!("/api/sessions/{id}/documents/doc-0000"), None).await;
    let home = doc["cluster"].as_u64().unwrap();
    let other = (0..4).find(|c| *c != home).unwrap();
    call(&app, "POST", &format!("/api/sessions/{id}/gather"), Some(json!({ "clusters": [other] }))).await;
    let (_, doc) = call(&app, "GET", &format!("/api/sessions/{id}/documents/doc-0000"), None).await;
    assert!(doc["cluster"].is_null());
}

#[tokio::test]
async fn single_document_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Corpus::new(
        vec![DocumentRecord::new("only", "Lonely heron lonely heron marsh").with_abstract("heron wading marsh")],
        "test",
    )
    .unwrap();
    corpus.write_jsonl(&dir.path().join("one.jsonl")).unwrap();
    let app = app(dir.path());
    let view = open_session(&app, "one.jsonl").await;
    assert_eq!(sizes(&view), vec![1]);
    assert_eq!(view["clusters"][0]["descriptors"][0]["term"], "heron");
    assert!(view["metrics"].is_null());
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path());
    let first_app = app(dir.path());
    let first = open_session(&first_app, "planted.jsonl").await;
    let id = first["session_id"].as_str().unwrap().to_string();
    let (_, gathered) = call(
        &first_app,
        "POST",
        &format!("/api/sessions/{id}/gather"),
        Some(json!({ "clusters": [0, 1] })),
    )
    .await;
    drop(first_app);

    let reopened = app(dir.path());
    let (status, view) = call(&reopened, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view, gathered);
    let (_, back) = call(&reopened, "POST", &format!("/api/sessions/{id}/back"), None).await;
    assert_eq!(back, first);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn reads_during_gather_see_whole_states() {
    let dir = tempfile::tempdir().unwrap();
    write_planted(dir.path());
    let app = app(dir.path());
    let first = open_session(&app, "planted.jsonl").await;
    let id = first["session_id"].as_str().unwrap().to_string();

    let writer = {
        let (app, id) = (app.clone(), id.clone());
        tokio::spawn(async move {
            call(&app, "POST", &format!("/api/sessions/{id}/gather"), Some(json!({ "clusters": [0, 1, 2] }))).await
        })
    };
    let mut seen = Vec::new();
    for _ in 0..50 {
        let (status, view) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        seen.push(view);
    }
    let (status, second) = writer.await.unwrap();
    assert_eq!(status, StatusCode::OK);
    for view in seen {
        assert!(view == first || view == second, "torn read: {view}");
    }
}

#[tokio::test]
async fn serves_static_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>ok</html>").unwrap();
    let app = router(
        AppState::open(ServiceConfig {
            ui_dir: Some(dir.path().to_path_buf()),
            ..ServiceConfig::default()
        })
        .unwrap(),
    );
    let res = app
        .oneshot(Request::builder().uri("/ui/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<html>ok</html>");
}
