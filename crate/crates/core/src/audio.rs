//! Object sound layer: query construction, cached sound retrieval and the
//! mapping from an object's position and depth to playback parameters.
//!
//! The frame maps onto a frontal field of ±45° azimuth and ±20° elevation
//! by default, linear in the centroid coordinates. Gain falls off as
//! `1 / (1 + 2·depth)`, so the farthest objects still play at one third.

use crate::backends::{BackendError, SoundAsset, SoundSearch};
use crate::model::Point;
use crate::vocab;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    /// Negative is the listener's left.
    pub azimuth_deg: f64,
    /// Positive is up.
    pub elevation_deg: f64,
    pub distance_gain: f64,
}

impl SpatialParams {
    pub fn is_finite(&self) -> bool {
        self.azimuth_deg.is_finite() && self.elevation_deg.is_finite() && self.distance_gain.is_finite()
    }
}

/// Angular extent the frame is mapped onto.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoundField {
    pub azimuth_half_range_deg: f64,
    pub elevation_half_range_deg: f64,
}

impl Default for SoundField {
    fn default() -> Self {
        Self {
            azimuth_half_range_deg: 45.0,
            elevation_half_range_deg: 20.0,
        }
    }
}

impl From<&crate::config::PipelineConfig> for SoundField {
    fn from(c: &crate::config::PipelineConfig) -> Self {
        Self {
            azimuth_half_range_deg: c.azimuth_half_range_deg,
            elevation_half_range_deg: c.elevation_half_range_deg,
        }
    }
}

pub fn distance_gain(depth_norm: f64) -> f64 {
    1.0 / (1.0 + 2.0 * depth_norm)
}

pub fn spatialize_in(field: SoundField, centroid: Point, depth_norm: f64) -> SpatialParams {
    SpatialParams {
        azimuth_deg: (centroid.0 - 0.5) * 2.0 * field.azimuth_half_range_deg,
        elevation_deg: (0.5 - centroid.1) * 2.0 * field.elevation_half_range_deg,
        distance_gain: distance_gain(depth_norm),
    }
}

/// Spatial parameters in the default ±45° × ±20° field.
pub fn spatialize(centroid: Point, depth_norm: f64) -> SpatialParams {
    spatialize_in(SoundField::default(), centroid, depth_norm)
}

/// The label followed by the first two content words of the caption.
pub fn sound_query(label: &str, refined_caption: &str) -> String {
    std::iter::once(label.to_string())
        .chain(vocab::content_words(refined_caption).into_iter().take(2))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Query → asset cache, optionally persisted as a JSON manifest.
#[derive(Debug, Default)]
pub struct SoundCache {
    entries: RwLock<BTreeMap<String, SoundAsset>>,
    manifest: Option<PathBuf>,
}

impl SoundCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a cache backed by `path`; a missing file starts empty.
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let entries = match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e),
        };
        Ok(Self {
            entries: RwLock::new(entries),
            manifest: Some(path),
        })
    }

    pub fn get(&self, query: &str) -> Option<SoundAsset> {
        self.entries.read().expect("cache lock").get(query).cloned()
    }

    /// Stores `asset` unless the key is already present; returns the stored one.
    pub fn insert(&self, query: &str, asset: SoundAsset) -> SoundAsset {
        self.entries
            .write()
            .expect("cache lock")
            .entry(query.to_string())
            .or_insert(asset)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the manifest (if any) via a temp file and rename.
    pub fn persist(&self) -> std::io::Result<()> {
        let Some(path) = &self.manifest else {
            return Ok(());
        };
        let bytes = serde_json::to_vec_pretty(&*self.entries.read().expect("cache lock"))?;
        write_atomic(path, &bytes)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    static SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let seq = SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp.{}.{seq}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Cached sound lookup. Hits never call the client.
pub fn retrieve_sound(
    query: &str,
    client: &dyn SoundSearch,
    cache: &SoundCache,
) -> Result<SoundAsset, BackendError> {
    if let Some(hit) = cache.get(query) {
        return Ok(hit);
    }
    let asset = client.search_sound(query)?;
    Ok(cache.insert(query, asset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::fixture::FixtureSoundSearch;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn spatialize_examples() {
        assert_eq!(
            spatialize(Point(0.5, 0.5), 0.0),
            SpatialParams { azimuth_deg: 0.0, elevation_deg: 0.0, distance_gain: 1.0 }
        );
        let right = spatialize(Point(1.0, 0.5), 0.0);
        assert_eq!((right.azimuth_deg, right.elevation_deg, right.distance_gain), (45.0, 0.0, 1.0));
        assert!((spatialize(Point(0.5, 0.5), 1.0).distance_gain - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(spatialize(Point(0.5, 0.0), 0.0).elevation_deg, 20.0);
    }

    #[test]
    fn query_examples() {
        assert_eq!(sound_query("car", "A white sedan is parked by the street."), "car white sedan");
        assert_eq!(sound_query("pot", ""), "pot");
        assert_eq!(sound_query("dog", "A dog."), "dog dog");
    }

    struct Counting {
        calls: AtomicUsize,
        up: bool,
    }

    impl SoundSearch for Counting {
        fn version(&self) -> String {
            "counting".into()
        }
        fn search_sound(&self, query: &str) -> Result<SoundAsset, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.up {
                FixtureSoundSearch.search_sound(query)
            } else {
                Err(BackendError::Unavailable { backend: "sound".into(), reason: "down".into() })
            }
        }
    }

    #[test]
    fn cache_serves_repeats_without_calling_client() {
        let client = Counting { calls: AtomicUsize::new(0), up: true };
        let cache = SoundCache::in_memory();
        let a = retrieve_sound("car honk", &client, &cache).unwrap();
        let b = retrieve_sound("car honk", &client, &cache).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.asset_id, "fx-car");
        assert_eq!(client.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn warm_cache_survives_client_outage() {
        let cache = SoundCache::in_memory();
        let up = Counting { calls: AtomicUsize::new(0), up: true };
        let warm = retrieve_sound("dog bark", &up, &cache).unwrap();
        let down = Counting { calls: AtomicUsize::new(0), up: false };
        assert_eq!(retrieve_sound("dog bark", &down, &cache).unwrap(), warm);
        assert!(matches!(
            retrieve_sound("cat purr", &down, &cache),
            Err(BackendError::Unavailable { .. })
        ));
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sounds.json");
        let cache = SoundCache::open(&path).unwrap();
        assert!(cache.is_empty());
        retrieve_sound("car white sedan", &FixtureSoundSearch, &cache).unwrap();
        cache.persist().unwrap();
        let reopened = SoundCache::open(&path).unwrap();
        assert_eq!(reopened.get("car white sedan"), cache.get("car white sedan"));
        assert_eq!(reopened.get("car"), None);
    }

    #[test]
    fn concurrent_misses_converge_to_one_entry() {
        let cache = SoundCache::in_memory();
        let client = Counting { calls: AtomicUsize::new(0), up: true };
        let results: Vec<SoundAsset> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..8)
                .map(|_| s.spawn(|| retrieve_sound("bird song", &client, &cache).unwrap()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(results.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(cache.len(), 1);
    }

    proptest! {
        #[test]
        fn mirror_and_monotone(x in 0.0f64..=1.0, y in 0.0f64..=1.0, d in 0.0f64..=1.0) {
            let p = spatialize(Point(x, y), d);
            let m = spatialize(Point(1.0 - x, y), d);
            prop_assert!((p.azimuth_deg + m.azimuth_deg).abs() < 1e-12);
            prop_assert!(p.azimuth_deg.abs() <= 45.0 && p.elevation_deg.abs() <= 20.0);
            prop_assert!(p.distance_gain > 0.0 && p.distance_gain <= 1.0);
        }

        #[test]
        fn cache_keys_are_exact(q1 in "[a-z]{1,8}", q2 in "[a-z]{1,8}") {
            prop_assume!(q1 != q2);
            let cache = SoundCache::in_memory();
            let a = retrieve_sound(&q1, &FixtureSoundSearch, &cache).unwrap();
            prop_assert_eq!(&a.query_used, &q1);
            prop_assert!(cache.get(&q2).is_none());
        }
    }
}
