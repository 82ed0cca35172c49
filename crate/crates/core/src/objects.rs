//! Object post-processing and presentation: filter detections, order them
//! by mask area, and phrase where each one sits.

use crate::audio::SpatialParams;
use crate::backends::SoundAsset;
use crate::config::PipelineConfig;
use crate::model::{Detection, Point};
use crate::refine::RefinementSource;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectError {
    #[error("object {0} has an empty refined caption")]
    EmptyCaption(usize),
}

/// Cell of a 3×3 grid over the frame, named the way it is spoken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum GridPosition {
    TopLeft,
    TopCenter,
    TopRight,
    MiddleLeft,
    Center,
    MiddleRight,
    BottomLeft,
    BottomCenter,
    BottomRight,
}

impl GridPosition {
    pub const ALL: [GridPosition; 9] = [
        Self::TopLeft,
        Self::TopCenter,
        Self::TopRight,
        Self::MiddleLeft,
        Self::Center,
        Self::MiddleRight,
        Self::BottomLeft,
        Self::BottomCenter,
        Self::BottomRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TopLeft => "top left",
            Self::TopCenter => "top center",
            Self::TopRight => "top right",
            Self::MiddleLeft => "middle left",
            Self::Center => "center",
            Self::MiddleRight => "middle right",
            Self::BottomLeft => "bottom left",
            Self::BottomCenter => "bottom center",
            Self::BottomRight => "bottom right",
        }
    }
}

impl fmt::Display for GridPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<GridPosition> for String {
    fn from(p: GridPosition) -> Self {
        p.as_str().to_string()
    }
}

impl TryFrom<String> for GridPosition {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown position phrase `{s}`"))
    }
}

/// A kept, indexed object of a keyframe with everything the player needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribedObject {
    /// 1-based, in nonincreasing mask-area order.
    pub index: usize,
    pub label: String,
    pub detection: Detection,
    pub raw_caption: String,
    pub refined_caption: String,
    pub refinement_source: RefinementSource,
    pub position_phrase: GridPosition,
    pub spatial: SpatialParams,
    pub sound: SoundAsset,
}

/// Keeps confident detections whose box is at least `min_dim_fraction` in
/// both width and height. Order is preserved.
pub fn filter_detections(detections: &[Detection], config: &PipelineConfig) -> Vec<Detection> {
    detections
        .iter()
        .filter(|d| {
            d.confidence >= config.confidence_threshold
                && d.bbox.w >= config.min_dim_fraction
                && d.bbox.h >= config.min_dim_fraction
        })
        .cloned()
        .collect()
}

/// Sorts by mask area, largest first (stable), and numbers from 1.
pub fn order_and_index(detections: Vec<Detection>) -> Vec<(usize, Detection)> {
    let mut sorted = detections;
    sorted.sort_by(|a, b| b.mask_area_fraction.total_cmp(&a.mask_area_fraction));
    sorted.into_iter().enumerate().map(|(i, d)| (i + 1, d)).collect()
}

fn third(v: f64) -> usize {
    if v < 1.0 / 3.0 {
        0
    } else if v < 2.0 / 3.0 {
        1
    } else {
        2
    }
}

/// Grid cell of a normalized centroid. Cell boundaries at 1/3 and 2/3 belong
/// to the cell on their right (or below).
pub fn position_phrase(centroid: Point) -> GridPosition {
    GridPosition::ALL[third(centroid.1) * 3 + third(centroid.0)]
}

/// The sentence spoken when an object is selected.
pub fn narration_text(obj: &DescribedObject) -> Result<String, ObjectError> {
    if obj.refined_caption.trim().is_empty() {
        return Err(ObjectError::EmptyCaption(obj.index));
    }
    Ok(format!(
        "This is a {}, located at the {}, description: {}",
        obj.label, obj.position_phrase, obj.refined_caption
    ))
}
