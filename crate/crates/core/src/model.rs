//! Domain types shared across the pipeline, and validation of annotation
//! input.
//!
//! All geometry is normalized to the unit square with `y = 0` at the top of
//! the frame. Pixel dimensions appear only in [`VideoMeta`].

use crate::audio::SpatialParams;
use crate::config::PipelineConfig;
use crate::objects::DescribedObject;
use crate::segmenter::Chunk;
use crate::vocab;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Slack allowed between a polygon's area and its bounding box area.
pub const MASK_AREA_TOLERANCE: f64 = 1e-3;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("malformed annotation{}: {reason}", frame_index.map(|i| format!(" at frame {i}")).unwrap_or_default())]
    MalformedAnnotation {
        frame_index: Option<u64>,
        reason: String,
    },
    #[error("video has no frames")]
    EmptyVideo,
}

fn malformed(frame_index: Option<u64>, reason: impl Into<String>) -> ValidationError {
    ValidationError::MalformedAnnotation {
        frame_index,
        reason: reason.into(),
    }
}

/// A normalized `(x, y)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point(pub f64, pub f64);

impl Point {
    pub fn x(&self) -> f64 {
        self.0
    }
    pub fn y(&self) -> f64 {
        self.1
    }
}

/// Normalized `(x, y, w, h)` box, top-left anchored. Serialized as a 4-array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, p: Point) -> bool {
        p.0 >= self.x - EPS
            && p.0 <= self.x + self.w + EPS
            && p.1 >= self.y - EPS
            && p.1 <= self.y + self.h + EPS
    }

    pub fn in_unit_square(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
            && self.x >= 0.0
            && self.y >= 0.0
            && self.w > 0.0
            && self.h > 0.0
            && self.x + self.w <= 1.0 + EPS
            && self.y + self.h <= 1.0 + EPS
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeAd {
    pub timestamp_s: f64,
    pub text: String,
    /// Playback pauses while an extended description is read.
    pub extended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub duration_s: f64,
    pub fps: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub title: String,
    #[serde(default)]
    pub native_ads: Vec<NativeAd>,
    /// Where the player fetches the media from; never proxied by the service.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_uri: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub confidence: f64,
    pub bbox: BBox,
    pub mask_polygon: Vec<Point>,
    pub mask_area_fraction: f64,
    pub centroid: Point,
    /// 0 is nearest to the camera.
    pub depth_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub caption: String,
    #[serde(default)]
    pub detections: Vec<Detection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_ad_index: Option<usize>,
    /// Raw per-object captions, parallel to `detections`. Only the fixture
    /// captioner reads these.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub object_captions: Vec<String>,
}

/// One annotation document: a video's metadata plus its frame records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub meta: VideoMeta,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DescriptionSource {
    NativeAD,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub frame_description: String,
    pub source: DescriptionSource,
    pub objects: Vec<DescribedObject>,
    pub chunk: Chunk,
}

/// The persisted, servable layered description of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedAdDocument {
    pub meta: VideoMeta,
    pub keyframes: Vec<Keyframe>,
    pub pipeline_config: PipelineConfig,
    pub provenance: BTreeMap<String, String>,
}

impl AugmentedAdDocument {
    /// Checks the cross-field document invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for pair in self.keyframes.windows(2) {
            if pair[1].timestamp_s <= pair[0].timestamp_s {
                return Err(format!(
                    "keyframe timestamps not increasing at frame {}",
                    pair[1].frame_index
                ));
            }
        }
        for kf in &self.keyframes {
            if kf.frame_index < kf.chunk.start_frame || kf.frame_index > kf.chunk.end_frame {
                return Err(format!("keyframe {} outside its chunk", kf.frame_index));
            }
            for (pos, obj) in kf.objects.iter().enumerate() {
                if obj.index != pos + 1 {
                    return Err(format!("object index gap in keyframe {}", kf.frame_index));
                }
                if !SpatialParams::is_finite(&obj.spatial) {
                    return Err(format!("non-finite spatial params in keyframe {}", kf.frame_index));
                }
            }
            let sorted = kf.objects.windows(2).all(|w| {
                w[0].detection.mask_area_fraction >= w[1].detection.mask_area_fraction
            });
            if !sorted {
                return Err(format!("objects not area-ordered in keyframe {}", kf.frame_index));
            }
        }
        for ad in &self.meta.native_ads {
            let present = self
                .keyframes
                .iter()
                .any(|k| k.source == DescriptionSource::NativeAD && k.frame_description == ad.text);
            if !present {
                return Err(format!("native AD at {}s has no keyframe", ad.timestamp_s));
            }
        }
        Ok(())
    }
}

fn validate_meta(meta: &VideoMeta) -> Result<(), ValidationError> {
    let bad = |r: &str| Err(malformed(None, r));
    if meta.video_id.trim().is_empty() {
        return bad("empty video_id");
    }
    if !(meta.duration_s.is_finite() && meta.duration_s > 0.0) {
        return bad("duration_s must be positive");
    }
    if !(meta.fps.is_finite() && meta.fps > 0.0) {
        return bad("fps must be positive");
    }
    if meta.width_px == 0 || meta.height_px == 0 {
        return bad("frame size must be at least 1x1 pixels");
    }
    let mut prev = f64::NEG_INFINITY;
    for (i, ad) in meta.native_ads.iter().enumerate() {
        if !(ad.timestamp_s.is_finite() && ad.timestamp_s >= 0.0 && ad.timestamp_s <= meta.duration_s)
        {
            return bad(&format!("native AD {i} timestamp outside the video"));
        }
        if ad.timestamp_s <= prev {
            return bad(&format!("native AD {i} timestamp not strictly increasing"));
        }
        if ad.text.trim().is_empty() {
            return bad(&format!("native AD {i} has empty text"));
        }
        prev = ad.timestamp_s;
    }
    Ok(())
}

/// Checks one detection's invariants; returns the violated rule.
pub fn check_detection(d: &Detection) -> Result<(), String> {
    if !vocab::is_label(&d.label) {
        return Err(format!("label `{}` not in the detector vocabulary", d.label));
    }
    if !(d.confidence.is_finite() && (0.0..=1.0).contains(&d.confidence)) {
        return Err(format!("confidence {} outside [0, 1]", d.confidence));
    }
    if !d.bbox.in_unit_square() {
        return Err(format!("bbox {:?} outside the unit square", <[f64; 4]>::from(d.bbox)));
    }
    if d.mask_polygon.len() < 3 {
        return Err("mask polygon needs at least 3 vertices".into());
    }
    let in_unit = |p: &Point| {
        p.0.is_finite() && p.1.is_finite() && (0.0..=1.0).contains(&p.0) && (0.0..=1.0).contains(&p.1)
    };
    if !d.mask_polygon.iter().all(in_unit) {
        return Err("mask polygon vertex outside the unit square".into());
    }
    let area = d.mask_area_fraction;
    if !(area.is_finite() && area > 0.0 && area <= 1.0) {
        return Err(format!("mask_area_fraction {area} outside (0, 1]"));
    }
    if area > d.bbox.area() + MASK_AREA_TOLERANCE {
        return Err(format!("mask area {area} exceeds bbox area {}", d.bbox.area()));
    }
    if !in_unit(&d.centroid) || !d.bbox.contains(d.centroid) {
        return Err("centroid outside bbox".into());
    }
    if !(d.depth_norm.is_finite() && (0.0..=1.0).contains(&d.depth_norm)) {
        return Err(format!("depth_norm {} outside [0, 1]", d.depth_norm));
    }
    Ok(())
}

/// Validates a video's frame records and returns them sorted by frame index.
///
/// Beyond per-field invariants, every native AD must be referenced by exactly
/// one frame, within one frame period of its timestamp.
pub fn validate_frames(
    meta: &VideoMeta,
    frames: Vec<FrameRecord>,
) -> Result<Vec<FrameRecord>, ValidationError> {
    if frames.is_empty() {
        return Err(ValidationError::EmptyVideo);
    }
    validate_meta(meta)?;
    let mut frames = frames;
    frames.sort_by_key(|f| f.frame_index);

    let mut ad_refs = vec![0usize; meta.native_ads.len()];
    let period = 1.0 / meta.fps;
    for (pos, f) in frames.iter().enumerate() {
        let at = Some(f.frame_index);
        if pos > 0 {
            let prev = &frames[pos - 1];
            if prev.frame_index == f.frame_index {
                return Err(malformed(at, "duplicate frame_index"));
            }
            if f.timestamp_s < prev.timestamp_s {
                return Err(malformed(at, "timestamp decreases"));
            }
        }
        if !(f.timestamp_s.is_finite() && f.timestamp_s >= 0.0) {
            return Err(malformed(at, "timestamp must be finite and nonnegative"));
        }
        if f.caption.trim().is_empty() {
            return Err(malformed(at, "empty frame caption"));
        }
        for (k, d) in f.detections.iter().enumerate() {
            check_detection(d).map_err(|r| malformed(at, format!("detection {k}: {r}")))?;
        }
        if !f.object_captions.is_empty() && f.object_captions.len() != f.detections.len() {
            return Err(malformed(at, "object_captions not parallel to detections"));
        }
        if let Some(i) = f.native_ad_index {
            let ad = meta
                .native_ads
                .get(i)
                .ok_or_else(|| malformed(at, format!("native_ad_index {i} out of range")))?;
            if (f.timestamp_s - ad.timestamp_s).abs() > period + EPS {
                return Err(malformed(at, format!("native AD {i} more than one frame away")));
            }
            ad_refs[i] += 1;
        }
    }
    if let Some(i) = ad_refs.iter().position(|&n| n != 1) {
        return Err(malformed(
            None,
            format!("native AD {i} referenced by {} frames, expected 1", ad_refs[i]),
        ));
    }
    Ok(frames)
}
