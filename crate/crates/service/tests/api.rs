use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use skeptik_core::analysis::Analyzer;
use skeptik_core::gateway::{Gateway, MockProvider};
use skeptik_core::taxonomy::{registry_default, FallacyRegistry, FallacyType};
use skeptik_service::api::{router, AppState, CACHE_STATUS_HEADER};
use skeptik_service::config::{ServiceConfig, TOKEN_HEADER};
use tempfile::TempDir;
use tower::ServiceExt;

const ARTICLE: &str = "The council met on Monday. Members debated the plan. Trust me, it will pass.\n\n\
    Turnout was high. Nobody objected. The vote was close. Crime has fallen ever since the cameras arrived.";

struct Harness {
    app: Router,
    provider: Arc<MockProvider>,
    state: AppState,
    _dir: TempDir,
}

fn harness_with(registry: FallacyRegistry, tweak: impl FnOnce(&mut ServiceConfig)) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig { cache_dir: dir.path().join("cache"), ..ServiceConfig::default() };
    tweak(&mut config);
    let provider = Arc::new(MockProvider::default());
    let analyzer = Analyzer::new(Gateway::new().with_provider(provider.clone()));
    let state = AppState::with_analyzer(&config, registry, analyzer).unwrap();
    Harness { app: router(state.clone()), provider, state, _dir: dir }
}

fn harness() -> Harness {
    harness_with(registry_default(), |_| {})
}

async fn send(app: &Router, request: Request<Body>) -> (StatusCode, Option<String>, Bytes) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let cache = response
        .headers()
        .get(CACHE_STATUS_HEADER)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, cache, bytes)
}

fn post(path: &str, body: &Value) -> Request<Body> {
    Request::post(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

fn json_of(bytes: &Bytes) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn analyze(h: &Harness) -> String {
    let (status, _, body) = send(&h.app, post("/api/analyze", &json!({"text": ARTICLE}))).await;
    assert_eq!(status, StatusCode::OK);
    json_of(&body)["analysis_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn healthz() {
    let h = harness();
    let (status, _, body) = send(&h.app, get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body), json!({"status": "ok"}));
}

#[tokio::test]
async fn analyze_then_cache_hit_is_identical() {
    let h = harness();
    let request = json!({"text": ARTICLE});
    let (s1, c1, first) = send(&h.app, post("/api/analyze", &request)).await;
    assert_eq!((s1, c1.as_deref()), (StatusCode::OK, Some("miss")));
    assert_eq!(h.provider.calls(), 1);

    let (s2, c2, second) = send(&h.app, post("/api/analyze", &request)).await;
    assert_eq!((s2, c2.as_deref()), (StatusCode::OK, Some("hit")));
    assert_eq!(first, second);
    assert_eq!(h.provider.calls(), 1);

    let body = json_of(&first);
    let codes: Vec<&str> = body["result"]["cases"][0]["fallacies"]["logical_fallacies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap())
        .collect();
    assert_eq!(codes, ["EBP", "PH"]);
    assert_eq!(body["version"], 0);
    assert_eq!(body["payload"]["spans"]["3"], json!(["EBP"]));

    let id = body["analysis_id"].as_str().unwrap();
    let (s3, _, stored) = send(&h.app, get(&format!("/api/analysis/{id}"))).await;
    assert_eq!(s3, StatusCode::OK);
    assert_eq!(stored, first);
}

#[tokio::test]
async fn analyze_rejects_bad_bodies() {
    let h = harness();
    for body in [json!({}), json!({"text": "a", "html": "<p>b</p>"})] {
        let (status, _, out) = send(&h.app, post("/api/analyze", &body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(json_of(&out)["error"]["code"], "bad_request");
    }
    let raw = Request::post("/api/analyze")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(send(&h.app, raw).await.0, StatusCode::BAD_REQUEST);
    let (status, _, _) = send(&h.app, post("/api/analyze", &json!({"url": "ftp://example.org/x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = send(&h.app, post("/api/analyze", &json!({"text": "   \n  "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = send(&h.app, post("/api/analyze", &json!({"html": "<html><body><nav><p>Home</p></nav></body></html>"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(h.provider.calls(), 0);
}

#[tokio::test]
async fn unknown_and_malformed_analysis_ids() {
    let h = harness();
    let (status, _, _) = send(&h.app, get("/api/analysis/not-hex")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let missing = "0".repeat(64);
    let (status, _, body) = send(&h.app, get(&format!("/api/analysis/{missing}"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["error"]["code"], "not_found");
}

#[tokio::test]
async fn chat_history_grows_by_two() {
    let h = harness();
    let id = analyze(&h).await;
    let (status, _, body) = send(
        &h.app,
        post("/api/chat", &json!({"analysis_id": id, "fallacy_code": "EBP", "message": "Why flag this?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let first = json_of(&body);
    assert_eq!(first["history_len"], 2);
    assert!(first["reply"].as_str().unwrap().contains("Why flag this?"));
    let session = first["session_id"].as_str().unwrap().to_string();

    for turn in 2..=4 {
        let (status, _, body) = send(
            &h.app,
            post(
                "/api/chat",
                &json!({"analysis_id": id, "fallacy_code": "EBP", "session_id": session, "message": format!("turn {turn}")}),
            ),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        let reply = json_of(&body);
        assert_eq!(reply["history_len"], 2 * turn);
        assert_eq!(reply["session_id"], session.as_str());
    }
    assert_eq!(h.state.sessions().len(), 1);
}

#[tokio::test]
async fn chat_error_statuses() {
    let h = harness();
    let id = analyze(&h).await;
    let cases = [
        (json!({"analysis_id": id, "fallacy_code": "EBP", "message": "  "}), StatusCode::BAD_REQUEST),
        (json!({"analysis_id": "xyz", "fallacy_code": "EBP", "message": "hi"}), StatusCode::BAD_REQUEST),
        (json!({"analysis_id": id, "fallacy_code": "ZZ", "message": "hi"}), StatusCode::BAD_REQUEST),
        (json!({"analysis_id": "f".repeat(64), "fallacy_code": "EBP", "message": "hi"}), StatusCode::NOT_FOUND),
        (json!({"analysis_id": id, "fallacy_code": "CP", "message": "hi"}), StatusCode::CONFLICT),
        (
            json!({"analysis_id": id, "fallacy_code": "EBP", "session_id": "nope", "message": "hi"}),
            StatusCode::NOT_FOUND,
        ),
        (json!({"analysis_id": id}), StatusCode::BAD_REQUEST),
    ];
    for (body, expected) in cases {
        let (status, _, _) = send(&h.app, post("/api/chat", &body)).await;
        assert_eq!(status, expected, "{body}");
    }
    assert!(h.state.sessions().is_empty());

    let (_, _, body) = send(&h.app, post("/api/chat", &json!({"analysis_id": id, "fallacy_code": "EBP", "message": "hi"}))).await;
    let session = json_of(&body)["session_id"].as_str().unwrap().to_string();
    let (status, _, body) = send(
        &h.app,
        post("/api/chat", &json!({"analysis_id": id, "fallacy_code": "PH", "session_id": session, "message": "hi"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"]["code"], "session_mismatch");
}

#[tokio::test]
async fn regenerate_bumps_version() {
    let h = harness();
    let id = analyze(&h).await;
    for expected in 1..=2 {
        let (status, _, body) =
            send(&h.app, post("/api/regenerate", &json!({"analysis_id": id, "fallacy_code": "PH"}))).await;
        assert_eq!(status, StatusCode::OK);
        let out = json_of(&body);
        assert_eq!(out["version"], expected);
        assert_eq!(out["instance"]["code"], "PH");
        assert_eq!(out["instance"]["sentence_indices"], json!([7]));
    }
    let (_, _, stored) = send(&h.app, get(&format!("/api/analysis/{id}"))).await;
    assert_eq!(json_of(&stored)["version"], 2);

    let (status, _, _) = send(&h.app, post("/api/regenerate", &json!({"analysis_id": id, "fallacy_code": "CP"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _, _) = send(&h.app, post("/api/regenerate", &json!({"analysis_id": id, "fallacy_code": "QQ"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = send(
        &h.app,
        post("/api/regenerate", &json!({"analysis_id": "a".repeat(64), "fallacy_code": "PH"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn fallacies_lists_registry() {
    let h = harness();
    let (status, _, body) = send(&h.app, get("/api/fallacies")).await;
    assert_eq!(status, StatusCode::OK);
    let body = json_of(&body);
    let list = body["fallacies"].as_array().unwrap();
    assert_eq!(list.len(), 9);
    assert!(list.iter().any(|f| f["code"] == "CP" && f["name"] == "Cherry Picking"));
    assert!(list[0]["wikipedia_link"].as_str().unwrap().starts_with("https://en.wikipedia.org/wiki/"));

    let extended = registry_default()
        .register(FallacyType::new(
            "SS",
            "Slippery Slope",
            "Claiming a small step inevitably leads to an extreme outcome.",
            "If we allow this, soon everything will be allowed.",
            9,
            false,
        ))
        .unwrap();
    let h = harness_with(extended, |_| {});
    let (_, _, body) = send(&h.app, get("/api/fallacies")).await;
    let body = json_of(&body);
    assert_eq!(body["version"], "builtin-9+SS");
    assert_eq!(body["fallacies"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn token_gate_and_session_inspection() {
    let h = harness_with(registry_default(), |c| {
        c.extension_token = Some("tok-123".into());
        c.expose_sessions = true;
    });
    assert_eq!(send(&h.app, get("/api/fallacies")).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(send(&h.app, get("/healthz")).await.0, StatusCode::OK);
    let authed = |path: &str| Request::get(path).header(TOKEN_HEADER, "tok-123").body(Body::empty()).unwrap();
    assert_eq!(send(&h.app, authed("/api/fallacies")).await.0, StatusCode::OK);

    let request = Request::post("/api/analyze")
        .header("content-type", "application/json")
        .header(TOKEN_HEADER, "tok-123")
        .body(Body::from(json!({"text": ARTICLE}).to_string()))
        .unwrap();
    let (_, _, body) = send(&h.app, request).await;
    let id = json_of(&body)["analysis_id"].as_str().unwrap().to_string();
    let request = Request::post("/api/chat")
        .header("content-type", "application/json")
        .header(TOKEN_HEADER, "tok-123")
        .body(Body::from(json!({"analysis_id": id, "fallacy_code": "PH", "message": "hello"}).to_string()))
        .unwrap();
    let (_, _, body) = send(&h.app, request).await;
    let session = json_of(&body)["session_id"].as_str().unwrap().to_string();
    let (status, _, body) = send(&h.app, authed(&format!("/api/session/{session}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["history"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn session_inspection_disabled_by_default() {
    let h = harness();
    let (status, _, _) = send(&h.app, get("/api/session/anything")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_allows_configured_origin_only() {
    let h = harness_with(registry_default(), |c| c.allowed_origins = vec!["chrome-extension://abc".into()]);
    let preflight = |origin: &str| {
        Request::options("/api/analyze")
            .header("origin", origin)
            .header("access-control-request-method", "POST")
            .body(Body::empty())
            .unwrap()
    };
    let ok = h.app.clone().oneshot(preflight("chrome-extension://abc")).await.unwrap();
    assert_eq!(
        ok.headers().get("access-control-allow-origin").map(|v| v.to_str().unwrap()),
        Some("chrome-extension://abc")
    );
    let denied = h.app.clone().oneshot(preflight("https://evil.example")).await.unwrap();
    assert!(denied.headers().get("access-control-allow-origin").is_none());
}
