//! File-backed document store.
//!
//! Layout under the root directory:
//!
//! ```text
//! index.json              video_id -> { file, sha256 } of processed documents
//! documents/<id>.json     one AugmentedAdDocument per video
//! annotations/<id>.json   ingested annotation files
//! sounds.json             sound retrieval cache
//! ```
//!
//! All writes go through a temp file and a rename. Each video has its own
//! reader/writer lock, so one video's writer never blocks another video.

use crate::audio::{write_atomic, SoundCache};
use crate::model::{AnnotationFile, AugmentedAdDocument};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no document for video `{0}`")]
    NotFound(String),
    #[error("stored document for `{video_id}` does not match its recorded hash")]
    HashMismatch { video_id: String },
    #[error("video id `{0}` must be 1-128 characters of [A-Za-z0-9._-] and not start with `.`")]
    InvalidId(String),
    #[error("store I/O at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("store data at {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// Path relative to the store root.
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub title: String,
    pub duration_s: f64,
    pub processed: bool,
}

#[derive(Debug)]
pub struct DocumentStore {
    root: PathBuf,
    index: RwLock<BTreeMap<String, IndexEntry>>,
    locks: Mutex<HashMap<String, Arc<RwLock<()>>>>,
    sounds: SoundCache,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> StoreError + '_ {
    move |source| StoreError::Json { path: path.display().to_string(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn check_video_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

/// Canonical serialized form of a document.
pub fn document_bytes(doc: &AugmentedAdDocument) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(doc).expect("documents serialize");
    bytes.push(b'\n');
    bytes
}

impl DocumentStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in [root.join("documents"), root.join("annotations")] {
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let index_path = root.join("index.json");
        let index = match std::fs::read(&index_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(json_err(&index_path))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(io_err(&index_path)(e)),
        };
        let sounds_path = root.join("sounds.json");
        let sounds = SoundCache::open(&sounds_path).map_err(io_err(&sounds_path))?;
        Ok(Self {
            root,
            index: RwLock::new(index),
            locks: Mutex::new(HashMap::new()),
            sounds,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn sound_cache(&self) -> &SoundCache {
        &self.sounds
    }

    /// Writes the sound cache manifest.
    pub fn persist_sounds(&self) -> Result<(), StoreError> {
        self.sounds.persist().map_err(io_err(&self.root.join("sounds.json")))
    }

    /// The per-video lock; readers share it, a writer holds it exclusively.
    pub fn video_lock(&self, video_id: &str) -> Arc<RwLock<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(video_id.to_string())
            .or_default()
            .clone()
    }

    fn annotation_path(&self, video_id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{video_id}.json"))
    }

    pub fn index_entry(&self, video_id: &str) -> Option<IndexEntry> {
        self.index.read().expect("index lock").get(video_id).cloned()
    }

    /// Stores an annotation file under its `video_id`.
    pub fn ingest_annotations(&self, annotations: &AnnotationFile) -> Result<(), StoreError> {
        let id = &annotations.meta.video_id;
        check_video_id(id)?;
        let lock = self.video_lock(id);
        let _guard = lock.write().expect("video lock");
        let path = self.annotation_path(id);
        let bytes = serde_json::to_vec_pretty(annotations).expect("annotations serialize");
        write_atomic(&path, &bytes).map_err(io_err(&path))
    }

    pub fn load_annotations(&self, video_id: &str) -> Result<AnnotationFile, StoreError> {
        check_video_id(video_id)?;
        let path = self.annotation_path(video_id);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(video_id.to_string()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_slice(&bytes).map_err(json_err(&path))
    }

    /// Every ingested or processed video, sorted by id.
    pub fn list_videos(&self) -> Result<Vec<VideoSummary>, StoreError> {
        let dir = self.root.join("annotations");
        let mut ids: Vec<String> = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        let index = self.index.read().expect("index lock").clone();
        ids.extend(index.keys().cloned());
        ids.sort();
        ids.dedup();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let meta = if index.contains_key(&id) {
                self.load_document(&id)?.meta
            } else {
                self.load_annotations(&id)?.meta
            };
            out.push(VideoSummary {
                processed: index.contains_key(&id),
                video_id: id,
                title: meta.title,
                duration_s: meta.duration_s,
            });
        }
        Ok(out)
    }

    /// Saves `doc` atomically and records its hash in the index.
    pub fn save_document(&self, doc: &AugmentedAdDocument) -> Result<IndexEntry, StoreError> {
        let id = &doc.meta.video_id;
        check_video_id(id)?;
        let lock = self.video_lock(id);
        let _guard = lock.write().expect("video lock");
        let bytes = document_bytes(doc);
        let file = format!("documents/{id}.json");
        let path = self.root.join(&file);
        write_atomic(&path, &bytes).map_err(io_err(&path))?;
        let entry = IndexEntry { file, sha256: sha256_hex(&bytes) };

        let mut index = self.index.write().expect("index lock");
        index.insert(id.clone(), entry.clone());
        let index_path = self.root.join("index.json");
        let index_bytes = serde_json::to_vec_pretty(&*index).expect("index serializes");
        write_atomic(&index_path, &index_bytes).map_err(io_err(&index_path))?;
        Ok(entry)
    }

    /// Raw stored bytes of a document, verified against the index hash.
    pub fn load_document_bytes(&self, video_id: &str) -> Result<Vec<u8>, StoreError> {
        check_video_id(video_id)?;
        let lock = self.video_lock(video_id);
        let _guard = lock.read().expect("video lock");
        let entry = self
            .index_entry(video_id)
            .ok_or_else(|| StoreError::NotFound(video_id.to_string()))?;
        let path = self.root.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(StoreError::HashMismatch { video_id: video_id.to_string() });
        }
        Ok(bytes)
    }

    pub fn load_document(&self, video_id: &str) -> Result<AugmentedAdDocument, StoreError> {
        let bytes = self.load_document_bytes(video_id)?;
        let entry = self.index_entry(video_id).map(|e| e.file).unwrap_or_default();
        serde_json::from_slice(&bytes).map_err(json_err(Path::new(&entry)))
    }
}
