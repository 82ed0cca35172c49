//! Pluggable model and service backends.
//!
//! Every external model sits behind a small trait here: text embedding,
//! captioning, description refinement, sound search, detection and depth.
//! [`fixture`] holds deterministic offline implementations driven by the
//! annotation file; [`remote`] holds HTTP clients for real services.

pub mod annotations;
pub mod fixture;
pub mod remote;

use crate::model::{AnnotationFile, Detection};
use crate::refine::RefinementRequest;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

pub use annotations::{load_annotations, AnnotationError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend `{backend}` unavailable: {reason}")]
    Unavailable { backend: String, reason: String },
    #[error("text is empty")]
    EmptyText,
    #[error("unknown frame {0}")]
    UnknownFrame(u64),
    #[error("focus detection is not present in frame {0}")]
    UnknownDetection(u64),
    #[error("no fixture caption for detection {detection} of frame {frame_index}")]
    MissingFixtureCaption { frame_index: u64, detection: usize },
    #[error("backend `{backend}` returned an invalid response: {reason}")]
    InvalidResponse { backend: String, reason: String },
}

/// A sentence embedding. Fixture vectors have unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; 0 when either vector is zero or lengths differ.
    pub fn cosine(&self, other: &Self) -> f64 {
        if self.values.len() != other.values.len() {
            return 0.0;
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (dot / denom).clamp(-1.0, 1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub frame_index: u64,
    /// When set, caption this object with the rest of the frame blurred.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<Detection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_caption: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundAsset {
    pub asset_id: String,
    pub uri: String,
    pub duration_s: f64,
    pub license: String,
    pub query_used: String,
}

pub trait TextEmbedder: Send + Sync {
    fn version(&self) -> String;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError>;
}

pub trait Captioner: Send + Sync {
    fn version(&self) -> String;
    fn caption(&self, request: &CaptionRequest) -> Result<String, BackendError>;
}

pub trait Refiner: Send + Sync {
    fn version(&self) -> String;
    fn refine(&self, prompt: &str, request: &RefinementRequest) -> Result<String, BackendError>;
}

pub trait SoundSearch: Send + Sync {
    fn version(&self) -> String;
    fn search_sound(&self, query: &str) -> Result<SoundAsset, BackendError>;
}

/// Object detector. At desk scale detections come from annotation files.
pub trait Detector: Send + Sync {
    fn version(&self) -> String;
    fn detect(&self, frame_index: u64) -> Result<Vec<Detection>, BackendError>;
}

/// Relative depth of a detected object, 0 nearest.
pub trait DepthEstimator: Send + Sync {
    fn version(&self) -> String;
    fn depth(&self, frame_index: u64, detection: &Detection) -> Result<f64, BackendError>;
}

/// The set of backends one pipeline run uses.
#[derive(Clone)]
pub struct Backends {
    pub embedder: Arc<dyn TextEmbedder>,
    pub captioner: Arc<dyn Captioner>,
    /// `None` runs the deterministic fallback refiner only.
    pub refiner: Option<Arc<dyn Refiner>>,
    pub sound: Arc<dyn SoundSearch>,
}

impl Backends {
    /// Offline backends reading captions from `annotations`; no LLM refiner.
    pub fn fixture(annotations: &AnnotationFile) -> Self {
        Self {
            embedder: Arc::new(fixture::HashedBagEmbedder),
            captioner: Arc::new(fixture::AnnotationCaptioner::new(annotations)),
            refiner: None,
            sound: Arc::new(fixture::FixtureSoundSearch),
        }
    }

    /// Fixtures, replaced by remote clients wherever `AD_FORGE_<BACKEND>_URL`
    /// is set.
    pub fn from_env(annotations: &AnnotationFile) -> Self {
        let mut b = Self::fixture(annotations);
        if let Some(cfg) = remote::RemoteConfig::from_env("EMBEDDER") {
            b.embedder = Arc::new(remote::HttpEmbedder::new(cfg));
        }
        if let Some(cfg) = remote::RemoteConfig::from_env("CAPTIONER") {
            b.captioner = Arc::new(remote::HttpCaptioner::new(cfg));
        }
        if let Some(cfg) = remote::RemoteConfig::from_env("REFINER") {
            b.refiner = Some(Arc::new(remote::HttpRefiner::new(cfg)));
        }
        if let Some(cfg) = remote::RemoteConfig::from_env("SOUND") {
            b.sound = Arc::new(remote::HttpSoundSearch::new(cfg));
        }
        b
    }

    /// Backend name to version, recorded into every document.
    pub fn provenance(&self) -> BTreeMap<String, String> {
        let mut p = BTreeMap::new();
        p.insert("embedder".into(), self.embedder.version());
        p.insert("captioner".into(), self.captioner.version());
        p.insert(
            "refiner".into(),
            self.refiner
                .as_ref()
                .map(|r| r.version())
                .unwrap_or_else(|| crate::refine::FALLBACK_VERSION.into()),
        );
        p.insert("sound".into(), self.sound.version());
        p
    }
}
