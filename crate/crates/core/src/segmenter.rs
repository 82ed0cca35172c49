//! Splits a frame sequence into chunks and picks one keyframe per chunk.
//!
//! A cut goes before frame `i` when any of these hold, checked in this order
//! and the first one recorded as the chunk's [`CutReason`]:
//!
//! 1. frame `i` carries a native audio description;
//! 2. the caption embeddings of frames `i - 1` and `i` have cosine below
//!    `scene_change_sim_threshold`;
//! 3. the label multisets of frames `i - 1` and `i` have Jaccard similarity
//!    below `object_change_jaccard_threshold`;
//! 4. the chunk has been open for `max_chunk_s` seconds or more.
//!
//! Within a chunk, a native-AD frame is always the keyframe. Otherwise each
//! frame gets an object score (min-max normalized detection count) and a
//! semantic score (min-max normalized caption uniqueness), and the highest
//! weighted sum wins, earliest frame on ties.

use crate::backends::{BackendError, EmbeddingVector, TextEmbedder};
use crate::config::PipelineConfig;
use crate::model::FrameRecord;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Value every score takes when a chunk has no spread to normalize.
pub const DEGENERATE_SCORE: f64 = 0.5;
const SPAN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutReason {
    VideoStart,
    NativeAD,
    SceneChange,
    ObjectChange,
    MaxInterval,
}

/// Inclusive range of frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start_frame: u64,
    pub end_frame: u64,
    pub cut_reason: CutReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyframeScore {
    pub frame_index: u64,
    pub object_score: f64,
    pub semantic_score: f64,
    pub total: f64,
}

/// Embeds every frame caption once, in frame order.
pub fn embed_captions(
    frames: &[FrameRecord],
    embedder: &dyn TextEmbedder,
) -> Result<Vec<EmbeddingVector>, BackendError> {
    frames.iter().map(|f| embedder.embed(&f.caption)).collect()
}

/// Jaccard similarity of two label multisets; two empty sets are identical.
pub fn label_jaccard(a: &FrameRecord, b: &FrameRecord) -> f64 {
    fn count(f: &FrameRecord) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for d in &f.detections {
            *m.entry(d.label.as_str()).or_default() += 1;
        }
        m
    }
    let (ca, cb) = (count(a), count(b));
    let mut inter = 0;
    let mut union = 0;
    for key in ca.keys().chain(cb.keys().filter(|k| !ca.contains_key(*k))) {
        let (x, y) = (ca.get(key).copied().unwrap_or(0), cb.get(key).copied().unwrap_or(0));
        inter += x.min(y);
        union += x.max(y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Segments frames given their precomputed caption embeddings.
pub fn segment_embedded(
    frames: &[FrameRecord],
    embeddings: &[EmbeddingVector],
    config: &PipelineConfig,
) -> Vec<Chunk> {
    assert_eq!(frames.len(), embeddings.len(), "one embedding per frame");
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let mut chunks = Vec::new();
    let mut open = Chunk {
        start_frame: first.frame_index,
        end_frame: first.frame_index,
        cut_reason: CutReason::VideoStart,
    };
    let mut open_since = first.timestamp_s;
    for i in 1..frames.len() {
        let (prev, cur) = (&frames[i - 1], &frames[i]);
        let reason = if cur.native_ad_index.is_some() {
            Some(CutReason::NativeAD)
        } else if embeddings[i - 1].cosine(&embeddings[i]) < config.scene_change_sim_threshold {
            Some(CutReason::SceneChange)
        } else if label_jaccard(prev, cur) < config.object_change_jaccard_threshold {
            Some(CutReason::ObjectChange)
        } else if cur.timestamp_s - open_since >= config.max_chunk_s - SPAN_EPS {
            Some(CutReason::MaxInterval)
        } else {
            None
        };
        match reason {
            Some(cut_reason) => {
                chunks.push(open);
                open = Chunk {
                    start_frame: cur.frame_index,
                    end_frame: cur.frame_index,
                    cut_reason,
                };
                open_since = cur.timestamp_s;
            }
            None => open.end_frame = cur.frame_index,
        }
    }
    chunks.push(open);
    chunks
}

/// Segments validated frames into chunks. Empty input yields no chunks.
pub fn segment(
    frames: &[FrameRecord],
    config: &PipelineConfig,
    embedder: &dyn TextEmbedder,
) -> Result<Vec<Chunk>, BackendError> {
    let embeddings = embed_captions(frames, embedder)?;
    Ok(segment_embedded(frames, &embeddings, config))
}

/// Position range of a chunk inside a frame slice sorted by frame index.
pub fn chunk_range(chunk: &Chunk, frames: &[FrameRecord]) -> std::ops::Range<usize> {
    let start = frames.partition_point(|f| f.frame_index < chunk.start_frame);
    let end = frames.partition_point(|f| f.frame_index <= chunk.end_frame);
    start..end
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || max - min <= 1e-12 {
        return vec![DEGENERATE_SCORE; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Min-max normalized detection counts of the chunk's frames.
pub fn object_scores(chunk: &Chunk, frames: &[FrameRecord]) -> Vec<f64> {
    let counts: Vec<f64> = frames[chunk_range(chunk, frames)]
        .iter()
        .map(|f| f.detections.len() as f64)
        .collect();
    min_max_normalize(&counts)
}

/// Uniqueness scores from embeddings of the chunk's frames, in order.
pub fn semantic_scores_embedded(embeddings: &[EmbeddingVector]) -> Vec<f64> {
    let n = embeddings.len();
    if n < 2 {
        return vec![DEGENERATE_SCORE; n];
    }
    let uniqueness: Vec<f64> = (0..n)
        .map(|i| {
            let sum: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| embeddings[i].cosine(&embeddings[j]))
                .sum();
            1.0 - sum / (n - 1) as f64
        })
        .collect();
    min_max_normalize(&uniqueness)
}

pub fn semantic_scores(
    chunk: &Chunk,
    frames: &[FrameRecord],
    embedder: &dyn TextEmbedder,
) -> Result<Vec<f64>, BackendError> {
    let embeddings = embed_captions(&frames[chunk_range(chunk, frames)], embedder)?;
    Ok(semantic_scores_embedded(&embeddings))
}

/// Per-frame scores for a chunk, given embeddings for exactly its frames.
pub fn score_chunk_embedded(
    chunk: &Chunk,
    frames: &[FrameRecord],
    embeddings: &[EmbeddingVector],
    config: &PipelineConfig,
) -> Vec<KeyframeScore> {
    let members = &frames[chunk_range(chunk, frames)];
    let objects = object_scores(chunk, frames);
    let semantics = semantic_scores_embedded(embeddings);
    members
        .iter()
        .zip(objects.into_iter().zip(semantics))
        .map(|(f, (object_score, semantic_score))| KeyframeScore {
            frame_index: f.frame_index,
            object_score,
            semantic_score,
            total: config.score_weight_object * object_score
                + config.score_weight_semantic * semantic_score,
        })
        .collect()
}

/// Keyframe of a chunk: its earliest native-AD frame if any, else the
/// best-scoring frame. Totals within a relative 1e-9 of each other tie.
pub fn pick_keyframe(
    chunk: &Chunk,
    frames: &[FrameRecord],
    scores: &[KeyframeScore],
    config: &PipelineConfig,
) -> u64 {
    let members = &frames[chunk_range(chunk, frames)];
    if let Some(f) = members.iter().find(|f| f.native_ad_index.is_some()) {
        return f.frame_index;
    }
    let tol = 1e-9 * (config.score_weight_object + config.score_weight_semantic);
    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.total > best.total + tol {
            best = s;
        }
    }
    best.frame_index
}

pub fn select_keyframe(
    chunk: &Chunk,
    frames: &[FrameRecord],
    embedder: &dyn TextEmbedder,
    config: &PipelineConfig,
) -> Result<u64, BackendError> {
    let embeddings = embed_captions(&frames[chunk_range(chunk, frames)], embedder)?;
    let scores = score_chunk_embedded(chunk, frames, &embeddings, config);
    Ok(pick_keyframe(chunk, frames, &scores, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::fixture::{bucket, HashedBagEmbedder};
    use crate::model::tests::detection;

    fn frame(i: u64, t: f64, caption: &str, labels: &[&str]) -> FrameRecord {
        FrameRecord {
            frame_index: i,
            timestamp_s: t,
            caption: caption.into(),
            detections: labels
                .iter()
                .map(|l| detection(l, 0.95, [0.1, 0.1, 0.2, 0.2], 0.03))
                .collect(),
            native_ad_index: None,
            object_captions: vec![],
        }
    }

    fn homogeneous(n: u64, fps: f64) -> Vec<FrameRecord> {
        (0..n)
            .map(|i| frame(i, i as f64 / fps, "A man stands in a kitchen.", &["person"]))
            .collect()
    }

    fn all_chunks(frames: &[FrameRecord]) -> Vec<Chunk> {
        segment(frames, &PipelineConfig::default(), &HashedBagEmbedder).unwrap()
    }

    #[test]
    fn single_frame_is_one_chunk() {
        let c = all_chunks(&homogeneous(1, 1.0));
        assert_eq!(
            c,
            vec![Chunk { start_frame: 0, end_frame: 0, cut_reason: CutReason::VideoStart }]
        );
    }

    #[test]
    fn twelve_seconds_hit_the_interval_cap_twice() {
        // Frames at t = 0..=11. Cuts land where the open chunk reaches 5 s:
        // before t = 5 and before t = 10.
        let c = all_chunks(&homogeneous(12, 1.0));
        let spans: Vec<(u64, u64, CutReason)> =
            c.iter().map(|c| (c.start_frame, c.end_frame, c.cut_reason)).collect();
        assert_eq!(
            spans,
            vec![
                (0, 4, CutReason::VideoStart),
                (5, 9, CutReason::MaxInterval),
                (10, 11, CutReason::MaxInterval)
            ]
        );
    }

    #[test]
    fn native_ad_starts_a_chunk() {
        let mut f = homogeneous(4, 1.0);
        f[2].native_ad_index = Some(0);
        let c = all_chunks(&f);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].start_frame, 2);
        assert_eq!(c[1].cut_reason, CutReason::NativeAD);
    }

    #[test]
    fn caption_and_label_changes_cut() {
        let words = ["kitchen", "ocean", "guitar", "forest", "violin", "tractor", "stove"];
        let (a, b) = words
            .iter()
            .flat_map(|a| words.iter().map(move |b| (*a, *b)))
            .find(|(a, b)| bucket(a) != bucket(b))
            .unwrap();
        let f = vec![
            frame(0, 0.0, a, &["person"]),
            frame(1, 0.5, b, &["person"]),
            frame(2, 1.0, b, &["car", "car"]),
        ];
        let reasons: Vec<CutReason> = all_chunks(&f).iter().map(|c| c.cut_reason).collect();
        assert_eq!(
            reasons,
            vec![CutReason::VideoStart, CutReason::SceneChange, CutReason::ObjectChange]
        );
    }

    #[test]
    fn jaccard_uses_multiset_counts() {
        let a = frame(0, 0.0, "x", &["car", "car", "person"]);
        let b = frame(1, 0.0, "x", &["car", "dog"]);
        // intersection {car:1} = 1, union {car:2, person:1, dog:1} = 4
        assert_eq!(label_jaccard(&a, &b), 0.25);
        assert_eq!(label_jaccard(&frame(0, 0.0, "x", &[]), &frame(1, 0.0, "x", &[])), 1.0);
    }

    fn with_counts(counts: &[usize]) -> (Chunk, Vec<FrameRecord>) {
        let frames: Vec<FrameRecord> = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| frame(i as u64, i as f64, "a kitchen", &vec!["cup"; n]))
            .collect();
        let chunk = Chunk {
            start_frame: 0,
            end_frame: counts.len() as u64 - 1,
            cut_reason: CutReason::VideoStart,
        };
        (chunk, frames)
    }

    #[test]
    fn object_score_examples() {
        let (c, f) = with_counts(&[2, 5, 8]);
        assert_eq!(object_scores(&c, &f), vec![0.0, 0.5, 1.0]);
        let (c, f) = with_counts(&[4, 4, 4]);
        assert_eq!(object_scores(&c, &f), vec![0.5, 0.5, 0.5]);
        let (c, f) = with_counts(&[1, 4]);
        assert_eq!(object_scores(&c, &f), vec![0.0, 1.0]);
    }

    #[test]
    fn semantic_score_examples() {
        let (c, f) = with_counts(&[1, 1, 1]);
        assert_eq!(semantic_scores(&c, &f, &HashedBagEmbedder).unwrap(), vec![0.5; 3]);

        let (c, f) = with_counts(&[1]);
        assert_eq!(semantic_scores(&c, &f, &HashedBagEmbedder).unwrap(), vec![0.5]);

        // Two identical captions and one whose only content word sits in a
        // bucket neither of theirs uses. By hand: cosines (1, 0, 0), so
        // u = (0.5, 0.5, 1.0), normalized to (0, 0, 1).
        let shared = ["kitchen", "stove"];
        let odd = ["ocean", "guitar", "forest", "violin", "tractor", "harbor"]
            .into_iter()
            .find(|w| shared.iter().all(|s| bucket(s) != bucket(w)))
            .unwrap();
        let (c, mut f) = with_counts(&[1, 1, 1]);
        f[0].caption = "kitchen stove".into();
        f[1].caption = "the kitchen stove".into();
        f[2].caption = odd.into();
        let s = semantic_scores(&c, &f, &HashedBagEmbedder).unwrap();
        assert_eq!(s, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn native_ad_frame_is_keyframe_by_default() {
        let (c, mut f) = with_counts(&[9, 1, 1, 1]);
        f[1].native_ad_index = Some(0);
        let config = PipelineConfig::default();
        assert_eq!(select_keyframe(&c, &f, &HashedBagEmbedder, &config).unwrap(), 1);
    }

    #[test]
    fn equal_totals_pick_the_first_frame() {
        let (c, f) = with_counts(&[3, 3, 3]);
        let config = PipelineConfig::default();
        assert_eq!(select_keyframe(&c, &f, &HashedBagEmbedder, &config).unwrap(), 0);

        // object (0, 1) and semantic (1, 0) at equal weights: totals (0.5, 0.5)
        let (c, f) = with_counts(&[1, 3]);
        let scores = vec![
            KeyframeScore { frame_index: 0, object_score: 0.0, semantic_score: 1.0, total: 0.5 },
            KeyframeScore { frame_index: 1, object_score: 1.0, semantic_score: 0.0, total: 0.5 },
        ];
        assert_eq!(pick_keyframe(&c, &f, &scores, &config), 0);
    }

    #[test]
    fn two_frame_chunks_have_degenerate_semantic_scores() {
        let (c, mut f) = with_counts(&[1, 3]);
        f[1].caption = "ocean waves".into();
        assert_eq!(semantic_scores(&c, &f, &HashedBagEmbedder).unwrap(), vec![0.5, 0.5]);
        let config = PipelineConfig::default();
        assert_eq!(select_keyframe(&c, &f, &HashedBagEmbedder, &config).unwrap(), 1);
    }

    #[test]
    fn chunk_range_locates_members() {
        let f = homogeneous(6, 1.0);
        let c = Chunk { start_frame: 2, end_frame: 4, cut_reason: CutReason::MaxInterval };
        assert_eq!(chunk_range(&c, &f), 2..5);
    }
}
