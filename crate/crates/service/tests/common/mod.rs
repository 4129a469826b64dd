#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lob_profiles::TickClock;
use lob_service::{router, AppState, Store};
use tower::ServiceExt;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> String {
    std::fs::read_to_string(scenario_path(name)).unwrap()
}

pub struct TestApp {
    pub app: Router,
    pub state: Arc<AppState>,
    pub dir: tempfile::TempDir,
}

pub fn app_with_token(token: Option<&str>) -> TestApp {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::with_clock(Store::open(dir.path()).unwrap(), token.map(String::from), Arc::new(TickClock::default())).unwrap();
    TestApp { app: router(state.clone()), state, dir }
}

pub fn app() -> TestApp {
    app_with_token(None)
}

pub struct Reply {
    pub status: StatusCode,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

impl TestApp {
    pub async fn send(&self, method: Method, uri: &str, body: impl Into<Body>, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let resp = self.app.clone().oneshot(req.body(body.into()).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply { status, text: String::from_utf8(bytes.to_vec()).unwrap() }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, Body::empty(), &[]).await
    }

    pub async fn put_json(&self, uri: &str, v: serde_json::Value) -> Reply {
        self.send(Method::PUT, uri, v.to_string(), &[("content-type", "application/json")]).await
    }

    pub async fn post_json(&self, uri: &str, v: serde_json::Value) -> Reply {
        self.send(Method::POST, uri, v.to_string(), &[("content-type", "application/json")]).await
    }

    pub async fn create(&self, project: &str) {
        let r = self.send(Method::PUT, &format!("/projects/{project}"), Body::empty(), &[]).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    }

    pub async fn import(&self, project: &str, text: &str) -> Reply {
        self.send(Method::POST, &format!("/projects/{project}/import"), text.to_string(), &[]).await
    }

    pub fn file(&self, rel: &str) -> String {
        std::fs::read_to_string(self.dir.path().join(rel)).unwrap_or_default()
    }
}
