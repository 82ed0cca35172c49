//! Deterministic offline backends.

use super::{
    BackendError, CaptionRequest, Captioner, DepthEstimator, Detector, EmbeddingVector, Refiner,
    SoundAsset, SoundSearch, TextEmbedder,
};
use crate::model::{AnnotationFile, Detection, FrameRecord};
use crate::refine::RefinementRequest;
use crate::vocab;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::sync::OnceLock;

pub const EMBEDDING_DIM: usize = 16;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Dimension a word lands in under the fixture embedder.
pub fn bucket(word: &str) -> usize {
    (fnv1a(word.as_bytes()) % EMBEDDING_DIM as u64) as usize
}

/// Bag-of-content-words embedder: each lowercase content word adds one to
/// its FNV-1a bucket, then the vector is L2-normalized. Text made only of
/// stopwords falls back to hashing all of its words.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashedBagEmbedder;

impl TextEmbedder for HashedBagEmbedder {
    fn version(&self) -> String {
        "hashed-bag-16/1".into()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        let mut words = vocab::content_words(text);
        if words.is_empty() {
            words = vocab::tokens(text);
        }
        if words.is_empty() {
            return Err(BackendError::EmptyText);
        }
        let mut values = vec![0.0; EMBEDDING_DIM];
        for w in &words {
            values[bucket(w)] += 1.0;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(EmbeddingVector { values })
    }
}

/// Returns the captions stored in an annotation file.
#[derive(Debug, Clone)]
pub struct AnnotationCaptioner {
    frames: BTreeMap<u64, FrameRecord>,
}

impl AnnotationCaptioner {
    pub fn new(annotations: &AnnotationFile) -> Self {
        Self {
            frames: annotations
                .frames
                .iter()
                .map(|f| (f.frame_index, f.clone()))
                .collect(),
        }
    }
}

impl Captioner for AnnotationCaptioner {
    fn version(&self) -> String {
        "annotation-captioner/1".into()
    }

    fn caption(&self, request: &CaptionRequest) -> Result<String, BackendError> {
        let frame = self
            .frames
            .get(&request.frame_index)
            .ok_or(BackendError::UnknownFrame(request.frame_index))?;
        let Some(focus) = &request.focus else {
            return Ok(frame.caption.clone());
        };
        let k = frame
            .detections
            .iter()
            .position(|d| d == focus)
            .ok_or(BackendError::UnknownDetection(frame.frame_index))?;
        frame
            .object_captions
            .get(k)
            .filter(|c| !c.trim().is_empty())
            .cloned()
            .ok_or(BackendError::MissingFixtureCaption {
                frame_index: frame.frame_index,
                detection: k,
            })
    }
}

/// Serves detections and depths straight from the annotation file.
#[derive(Debug, Clone)]
pub struct AnnotationDetector {
    frames: BTreeMap<u64, Vec<Detection>>,
}

impl AnnotationDetector {
    pub fn new(annotations: &AnnotationFile) -> Self {
        Self {
            frames: annotations
                .frames
                .iter()
                .map(|f| (f.frame_index, f.detections.clone()))
                .collect(),
        }
    }
}

impl Detector for AnnotationDetector {
    fn version(&self) -> String {
        "annotation-detector/1".into()
    }

    fn detect(&self, frame_index: u64) -> Result<Vec<Detection>, BackendError> {
        self.frames
            .get(&frame_index)
            .cloned()
            .ok_or(BackendError::UnknownFrame(frame_index))
    }
}

impl DepthEstimator for AnnotationDetector {
    fn version(&self) -> String {
        "annotation-depth/1".into()
    }

    fn depth(&self, frame_index: u64, detection: &Detection) -> Result<f64, BackendError> {
        let dets = self
            .frames
            .get(&frame_index)
            .ok_or(BackendError::UnknownFrame(frame_index))?;
        dets.iter()
            .find(|d| *d == detection)
            .map(|d| d.depth_norm)
            .ok_or(BackendError::UnknownDetection(frame_index))
    }
}

/// Refiner that hands back the raw object caption untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoRefiner;

impl Refiner for EchoRefiner {
    fn version(&self) -> String {
        "echo/1".into()
    }

    fn refine(&self, _prompt: &str, request: &RefinementRequest) -> Result<String, BackendError> {
        Ok(request.raw_object_caption.clone())
    }
}

#[derive(Debug, Deserialize)]
struct BundledAsset {
    asset_id: String,
    uri: String,
    duration_s: f64,
    license: String,
}

fn bundled_assets() -> &'static BTreeMap<String, BundledAsset> {
    static ASSETS: OnceLock<BTreeMap<String, BundledAsset>> = OnceLock::new();
    ASSETS.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/sound_assets.json"))
            .expect("bundled sound table parses")
    })
}

/// Label key used when no vocabulary label appears in a query.
pub const GENERIC_SOUND: &str = "object";

/// The first vocabulary label mentioned in `query`, matching whole words.
/// Where labels start at the same word, the longer one wins.
pub fn first_label_in(query: &str) -> Option<&'static str> {
    let words = vocab::tokens(query);
    for start in 0..words.len() {
        let hit = vocab::labels()
            .iter()
            .filter(|label| {
                let parts: Vec<&str> = label.split(' ').collect();
                words.len() >= start + parts.len()
                    && parts.iter().zip(&words[start..]).all(|(p, w)| p == w)
            })
            .max_by_key(|label| label.len());
        if let Some(label) = hit {
            return Some(label);
        }
    }
    None
}

/// Maps the first vocabulary label in a query to a bundled sound effect.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureSoundSearch;

impl SoundSearch for FixtureSoundSearch {
    fn version(&self) -> String {
        "bundled-sounds/1".into()
    }

    fn search_sound(&self, query: &str) -> Result<SoundAsset, BackendError> {
        let key = first_label_in(query).unwrap_or(GENERIC_SOUND);
        let a = &bundled_assets()[key];
        Ok(SoundAsset {
            asset_id: a.asset_id.clone(),
            uri: a.uri.clone(),
            duration_s: a.duration_s,
            license: a.license.clone(),
            query_used: query.to_string(),
        })
    }
}
