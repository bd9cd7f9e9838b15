use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use skeptik_core::gateway::{
    CompletionProvider, CompletionRequest, Gateway, GatewayError, Message, OpenAiProvider, ProviderConfig,
    ProviderError, RetryPolicy,
};

#[derive(Clone, Default)]
struct Seen {
    calls: Arc<AtomicUsize>,
    last_body: Arc<std::sync::Mutex<Option<Value>>>,
}

async fn handler(
    State(seen): State<Seen>,
    Path(mode): Path<String>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    seen.calls.fetch_add(1, Ordering::SeqCst);
    *seen.last_body.lock().unwrap() = Some(body.clone());
    let auth = headers.get("authorization").and_then(|v| v.to_str().ok());
    if auth != Some("Bearer sk-test") {
        return (StatusCode::UNAUTHORIZED, Json(json!({"error": "bad key"})));
    }
    match mode.as_str() {
        "ok" => (StatusCode::OK, Json(json!({"choices": [{"message": {"role": "assistant", "content": "hello there"}}]}))),
        "busy" => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({}))),
        "limited" => (StatusCode::TOO_MANY_REQUESTS, Json(json!({}))),
        "bad" => (StatusCode::BAD_REQUEST, Json(json!({"error": "context too long"}))),
        "empty" => (StatusCode::OK, Json(json!({"choices": []}))),
        "slow" => {
            tokio::time::sleep(Duration::from_millis(800)).await;
            (StatusCode::OK, Json(json!({"choices": [{"message": {"content": "late"}}]})))
        }
        _ => (StatusCode::NOT_FOUND, Json(json!({}))),
    }
}

async fn server() -> (String, Seen) {
    let seen = Seen::default();
    let app = Router::new().route("/:mode/chat/completions", post(handler)).with_state(seen.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), seen)
}

fn request() -> CompletionRequest {
    CompletionRequest {
        model: "gpt-test".into(),
        temperature: 0.0,
        timeout: Duration::from_secs(5),
        messages: vec![Message::user("detect")],
    }
}

#[tokio::test]
async fn status_codes_map_to_provider_errors() {
    let (base, seen) = server().await;
    let ok = OpenAiProvider::new("openai", format!("{base}/ok/"), "sk-test");
    assert_eq!(ok.complete(&request()).await.unwrap(), "hello there");
    let body = seen.last_body.lock().unwrap().clone().unwrap();
    assert_eq!(body["model"], "gpt-test");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"], json!([{"role": "user", "content": "detect"}]));

    let wrong_key = OpenAiProvider::new("openai", format!("{base}/ok"), "sk-other");
    assert!(matches!(wrong_key.complete(&request()).await, Err(ProviderError::Auth(_))));

    let cases = [("busy", true), ("limited", true), ("bad", false), ("empty", false)];
    for (mode, retryable) in cases {
        let provider = OpenAiProvider::new("openai", format!("{base}/{mode}"), "sk-test");
        let err = provider.complete(&request()).await.unwrap_err();
        assert_eq!(err.is_retryable(), retryable, "{mode}: {err}");
    }
}

#[tokio::test]
async fn gateway_retries_then_maps_errors() {
    let (base, seen) = server().await;
    let gateway = |mode: &str| {
        Gateway::new()
            .with_provider(Arc::new(OpenAiProvider::new("openai", format!("{base}/{mode}"), "sk-test")))
            .with_retry_policy(RetryPolicy { base_delay: Duration::from_millis(1) })
    };
    let config = ProviderConfig::new("openai", "gpt-test").with_max_retries(2);

    let err = gateway("busy").send(vec![Message::user("x")], &config).await.unwrap_err();
    assert!(matches!(err, GatewayError::ProviderUnavailable { .. }));
    assert_eq!(seen.calls.load(Ordering::SeqCst), 3);

    let before = seen.calls.load(Ordering::SeqCst);
    let bad_key = Gateway::new()
        .with_provider(Arc::new(OpenAiProvider::new("openai", format!("{base}/ok"), "nope")))
        .with_retry_policy(RetryPolicy { base_delay: Duration::from_millis(1) });
    let err = bad_key.send(vec![Message::user("x")], &config).await.unwrap_err();
    assert!(matches!(err, GatewayError::AuthFailure { .. }));
    assert_eq!(seen.calls.load(Ordering::SeqCst), before + 1);

    let quick = config.clone().with_timeout(Duration::from_millis(100)).with_max_retries(0);
    let err = gateway("slow").send(vec![Message::user("x")], &quick).await.unwrap_err();
    assert!(matches!(err, GatewayError::Timeout(_)));

    let reply = gateway("ok").send(vec![Message::user("x")], &config).await.unwrap();
    assert_eq!(reply, "hello there");
}

#[test]
fn debug_output_hides_key() {
    let provider = OpenAiProvider::new("openai", "https://api.example.org/v1", "sk-very-secret");
    assert!(!format!("{provider:?}").contains("sk-very-secret"));
}
