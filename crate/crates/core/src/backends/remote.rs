//! HTTP clients for remote backends.
//!
//! Each backend is a single JSON `POST` endpoint whose request and response
//! bodies mirror the trait method. Endpoints come from
//! `AD_FORGE_<BACKEND>_URL`, with an optional bearer token in
//! `AD_FORGE_<BACKEND>_KEY`. `AD_FORGE_TIMEOUT_MS` and `AD_FORGE_RETRIES`
//! bound every call; exhausted calls surface [`BackendError::Unavailable`].

use super::{
    BackendError, CaptionRequest, Captioner, DepthEstimator, Detector, EmbeddingVector, Refiner,
    SoundAsset, SoundSearch, TextEmbedder,
};
use crate::model::Detection;
use crate::refine::RefinementRequest;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::time::Duration;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_RETRIES: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first failed one.
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            key: None,
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
        }
    }

    /// Reads `AD_FORGE_<backend>_URL` and friends; `None` when no URL is set.
    pub fn from_env(backend: &str) -> Option<Self> {
        let var = |suffix: &str| std::env::var(format!("AD_FORGE_{backend}_{suffix}")).ok();
        let url = var("URL").filter(|u| !u.trim().is_empty())?;
        let timeout = std::env::var("AD_FORGE_TIMEOUT_MS")
            .ok()
            .and_then(|v| v.parse().ok())
            .map(Duration::from_millis)
            .unwrap_or(DEFAULT_TIMEOUT);
        let retries = std::env::var("AD_FORGE_RETRIES")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_RETRIES);
        Some(Self {
            url,
            key: var("KEY"),
            timeout,
            retries,
        })
    }
}

/// Shared JSON-over-HTTP transport.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    name: String,
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(name: impl Into<String>, config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            name: name.into(),
            config,
            agent,
        }
    }

    fn unavailable(&self, reason: impl ToString) -> BackendError {
        BackendError::Unavailable {
            backend: self.name.clone(),
            reason: reason.to_string(),
        }
    }

    fn invalid(&self, reason: impl ToString) -> BackendError {
        BackendError::InvalidResponse {
            backend: self.name.clone(),
            reason: reason.to_string(),
        }
    }

    fn attempt<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let mut request = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let response = request.send_json(body).map_err(|e| self.unavailable(e))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(self.unavailable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(self.invalid(format!("HTTP {status}")));
        }
        response.into_body().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) | ureq::Error::Io(_) => self.unavailable(e),
            other => self.invalid(other),
        })
    }

    /// Posts `body`, retrying only when the backend is unavailable.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let mut last = None;
        for _ in 0..=self.config.retries {
            match self.attempt(body) {
                Err(e @ BackendError::Unavailable { .. }) => last = Some(e),
                other => return other,
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn version(&self) -> String {
        format!("remote:{}", self.config.url)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

pub struct HttpEmbedder(RemoteClient);

impl HttpEmbedder {
    pub fn new(config: RemoteConfig) -> Self {
        Self(RemoteClient::new("embedder", config))
    }
}

impl TextEmbedder for HttpEmbedder {
    fn version(&self) -> String {
        self.0.version()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyText);
        }
        let v: EmbeddingVector = self.0.call(&EmbedRequest { text })?;
        if v.values.is_empty() || !v.values.iter().all(|x| x.is_finite()) {
            return Err(self.0.invalid("embedding must be a non-empty finite vector"));
        }
        Ok(v)
    }
}

#[derive(Deserialize)]
struct CaptionResponse {
    caption: String,
}

pub struct HttpCaptioner(RemoteClient);

impl HttpCaptioner {
    pub fn new(config: RemoteConfig) -> Self {
        Self(RemoteClient::new("captioner", config))
    }
}

impl Captioner for HttpCaptioner {
    fn version(&self) -> String {
        self.0.version()
    }

    fn caption(&self, request: &CaptionRequest) -> Result<String, BackendError> {
        let r: CaptionResponse = self.0.call(request)?;
        if r.caption.trim().is_empty() {
            return Err(self.0.invalid("empty caption"));
        }
        Ok(r.caption)
    }
}

#[derive(Serialize)]
struct RefineRequest<'a> {
    prompt: &'a str,
    request: &'a RefinementRequest,
}

#[derive(Deserialize)]
struct RefineResponse {
    text: String,
}

pub struct HttpRefiner(RemoteClient);

impl HttpRefiner {
    pub fn new(config: RemoteConfig) -> Self {
        Self(RemoteClient::new("refiner", config))
    }
}

impl Refiner for HttpRefiner {
    fn version(&self) -> String {
        self.0.version()
    }

    fn refine(&self, prompt: &str, request: &RefinementRequest) -> Result<String, BackendError> {
        let r: RefineResponse = self.0.call(&RefineRequest { prompt, request })?;
        Ok(r.text)
    }
}

#[derive(Serialize)]
struct SoundRequest<'a> {
    query: &'a str,
    max_results: u32,
}

#[derive(Deserialize)]
struct SoundHit {
    #[serde(default)]
    asset_id: Option<String>,
    uri: String,
    duration_s: f64,
    license: String,
}

#[derive(Deserialize)]
struct SoundResponse {
    results: Vec<SoundHit>,
}

pub struct HttpSoundSearch(RemoteClient);

impl HttpSoundSearch {
    pub fn new(config: RemoteConfig) -> Self {
        Self(RemoteClient::new("sound", config))
    }
}

impl SoundSearch for HttpSoundSearch {
    fn version(&self) -> String {
        self.0.version()
    }

    fn search_sound(&self, query: &str) -> Result<SoundAsset, BackendError> {
        let r: SoundResponse = self.0.call(&SoundRequest { query, max_results: 1 })?;
        let hit = r
            .results
            .into_iter()
            .next()
            .ok_or_else(|| self.0.invalid("no results"))?;
        if !(hit.duration_s.is_finite() && hit.duration_s > 0.0) {
            return Err(self.0.invalid("sound duration must be positive"));
        }
        Ok(SoundAsset {
            asset_id: hit.asset_id.unwrap_or_else(|| hit.uri.clone()),
            uri: hit.uri,
            duration_s: hit.duration_s,
            license: hit.license,
            query_used: query.to_string(),
        })
    }
}

#[derive(Serialize)]
struct FrameQuery<'a> {
    frame_index: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    detection: Option<&'a Detection>,
}

#[derive(Deserialize)]
struct DetectResponse {
    detections: Vec<Detection>,
}

#[derive(Deserialize)]
struct DepthResponse {
    depth_norm: f64,
}

pub struct HttpDetector(RemoteClient);

impl HttpDetector {
    pub fn new(config: RemoteConfig) -> Self {
        Self(RemoteClient::new("detector", config))
    }
}

impl Detector for HttpDetector {
    fn version(&self) -> String {
        self.0.version()
    }

    fn detect(&self, frame_index: u64) -> Result<Vec<Detection>, BackendError> {
        let r: DetectResponse = self.0.call(&FrameQuery { frame_index, detection: None })?;
        Ok(r.detections)
    }
}

pub struct HttpDepthEstimator(RemoteClient);

impl HttpDepthEstimator {
    pub fn new(config: RemoteConfig) -> Self {
        Self(RemoteClient::new("depth", config))
    }
}

impl DepthEstimator for HttpDepthEstimator {
    fn version(&self) -> String {
        self.0.version()
    }

    fn depth(&self, frame_index: u64, detection: &Detection) -> Result<f64, BackendError> {
        let r: DepthResponse = self.0.call(&FrameQuery {
            frame_index,
            detection: Some(detection),
        })?;
        if !(0.0..=1.0).contains(&r.depth_norm) {
            return Err(self.0.invalid("depth_norm outside [0, 1]"));
        }
        Ok(r.depth_norm)
    }
}
