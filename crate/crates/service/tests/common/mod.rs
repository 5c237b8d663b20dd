#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use crowdgaze_service::app::{system_clock, Clock};
use crowdgaze_service::{http, EventStore, MemoryStore, Platform, PlatformConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Client {
    pub platform: Arc<Platform>,
    pub router: Router,
}

impl Client {
    pub fn new() -> Self {
        Self::with(Box::new(MemoryStore::new()), PlatformConfig::default(), system_clock())
    }

    pub fn with(store: Box<dyn EventStore>, config: PlatformConfig, clock: Clock) -> Self {
        let platform = Arc::new(Platform::open(store, config, clock).unwrap());
        Self {
            router: http::router(platform.clone()),
            platform,
        }
    }

    pub async fn raw(&self, method: Method, uri: &str, content_type: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", content_type)
            .body(Body::from(body))
            .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let bytes = body.map(|b| serde_json::to_vec(&b).unwrap()).unwrap_or_default();
        let (status, out) = self.raw(method, uri, "application/json", bytes).await;
        let value = if out.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&out).unwrap_or(Value::Null)
        };
        (status, value)
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn admit(&self) -> String {
        let (s, v) = self
            .post("/participants", json!({ "screen_width": 1920, "screen_height": 1080 }))
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["participant_id"].as_str().unwrap().to_owned()
    }

    pub async fn session(&self, campaign: &str, participant: &str, seed: u64) -> String {
        let (s, v) = self
            .post(
                "/sessions",
                json!({ "campaign_id": campaign, "participant_id": participant, "seed": seed }),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["session_id"].as_str().unwrap().to_owned()
    }

    pub async fn next(&self, session: &str) -> Value {
        let (s, v) = self.get(&format!("/sessions/{session}/next")).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        v
    }

    pub async fn respond(&self, session: &str, step: u64, text: &str) -> (StatusCode, Value) {
        self.post(
            &format!("/sessions/{session}/steps/{step}/response"),
            json!({ "text": text }),
        )
        .await
    }
}

/// `videos` videos of 120 s at 1024×576, `frames` frames of interest each.
pub fn campaign_json(id: &str, videos: usize, frames: usize) -> Value {
    let vs: Vec<Value> = (0..videos)
        .map(|v| {
            json!({
                "video_id": format!("v{v}"),
                "duration": 120.0,
                "frame_width": 1024,
                "frame_height": 576,
                "uri": format!("https://example.org/v{v}.mp4"),
            })
        })
        .collect();
    let fs: Vec<Value> = (0..videos)
        .flat_map(|v| {
            (0..frames).map(move |f| json!({ "video_id": format!("v{v}"), "frame_time_ms": 15_000 + 30_000 * f }))
        })
        .collect();
    json!({ "id": id, "videos": vs, "frames_of_interest": fs })
}

/// Text that passes a tutorial step view: the triplet nearest the letter's final position.
pub fn passing_text(step: &Value) -> String {
    let spec: crowdgaze::TutorialSpec = serde_json::from_value(step["spec"].clone()).unwrap();
    spec.chart.nearest(spec.final_position).unwrap().label.to_string()
}

/// A triplet on the trial's chart.
pub fn chart_text(step: &Value, pick: usize) -> String {
    let spec: crowdgaze::TrialSpec = serde_json::from_value(step["spec"].clone()).unwrap();
    let placements = &spec.chart.placements;
    placements[pick % placements.len()].label.to_string()
}

pub const INVALID_TEXT: &str = "IO1";
