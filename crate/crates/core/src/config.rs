//! Pipeline configuration and its flat `key = value` text form.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("invalid value for `{key}`: {value}")]
    InvalidValue { key: String, value: String },
    #[error("`{key}` = {value} is outside {range}")]
    OutOfRange {
        key: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("score weights must be nonnegative with a positive sum")]
    Weights,
    #[error("reading config: {0}")]
    Io(String),
}

/// Tunables for every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Detections below this confidence are dropped (inclusive keep).
    pub confidence_threshold: f64,
    /// Minimum normalized width and height of a kept detection.
    pub min_dim_fraction: f64,
    /// Chunks are cut once their span reaches this many seconds.
    pub max_chunk_s: f64,
    /// Caption-embedding cosine below which consecutive frames are a scene change.
    pub scene_change_sim_threshold: f64,
    /// Label-multiset Jaccard below which consecutive frames are an object change.
    pub object_change_jaccard_threshold: f64,
    pub score_weight_object: f64,
    pub score_weight_semantic: f64,
    pub iou_match_threshold: f64,
    /// Half-width of the horizontal sound field; azimuth spans ±this.
    pub azimuth_half_range_deg: f64,
    /// Half-height of the vertical sound field; elevation spans ±this.
    pub elevation_half_range_deg: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.9,
            min_dim_fraction: 0.001,
            max_chunk_s: 5.0,
            scene_change_sim_threshold: 0.6,
            object_change_jaccard_threshold: 0.5,
            score_weight_object: 0.5,
            score_weight_semantic: 0.5,
            iou_match_threshold: 0.5,
            azimuth_half_range_deg: 45.0,
            elevation_half_range_deg: 20.0,
        }
    }
}

const KEYS: [&str; 10] = [
    "confidence_threshold",
    "min_dim_fraction",
    "max_chunk_s",
    "scene_change_sim_threshold",
    "object_change_jaccard_threshold",
    "score_weight_object",
    "score_weight_semantic",
    "iou_match_threshold",
    "azimuth_half_range_deg",
    "elevation_half_range_deg",
];

impl PipelineConfig {
    fn field_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "confidence_threshold" => &mut self.confidence_threshold,
            "min_dim_fraction" => &mut self.min_dim_fraction,
            "max_chunk_s" => &mut self.max_chunk_s,
            "scene_change_sim_threshold" => &mut self.scene_change_sim_threshold,
            "object_change_jaccard_threshold" => &mut self.object_change_jaccard_threshold,
            "score_weight_object" => &mut self.score_weight_object,
            "score_weight_semantic" => &mut self.score_weight_semantic,
            "iou_match_threshold" => &mut self.iou_match_threshold,
            "azimuth_half_range_deg" => &mut self.azimuth_half_range_deg,
            "elevation_half_range_deg" => &mut self.elevation_half_range_deg,
            _ => return None,
        })
    }

    fn field(&self, key: &str) -> f64 {
        let mut copy = self.clone();
        *copy.field_mut(key).expect("known key")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |key: &'static str, v: f64, lo: f64, hi: f64, lo_open: bool, range| {
            let ok = v.is_finite() && (if lo_open { v > lo } else { v >= lo }) && v <= hi;
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { key, value: v, range })
            }
        };
        check("confidence_threshold", self.confidence_threshold, 0.0, 1.0, false, "[0, 1]")?;
        check("min_dim_fraction", self.min_dim_fraction, 0.0, 1.0, false, "[0, 1]")?;
        check("max_chunk_s", self.max_chunk_s, 0.0, f64::MAX, true, "(0, inf)")?;
        check(
            "scene_change_sim_threshold",
            self.scene_change_sim_threshold,
            -1.0,
            1.0,
            false,
            "[-1, 1]",
        )?;
        check(
            "object_change_jaccard_threshold",
            self.object_change_jaccard_threshold,
            0.0,
            1.0,
            false,
            "[0, 1]",
        )?;
        check("iou_match_threshold", self.iou_match_threshold, 0.0, 1.0, true, "(0, 1]")?;
        check("azimuth_half_range_deg", self.azimuth_half_range_deg, 0.0, 90.0, true, "(0, 90]")?;
        check(
            "elevation_half_range_deg",
            self.elevation_half_range_deg,
            0.0,
            90.0,
            true,
            "(0, 90]",
        )?;
        let (wo, ws) = (self.score_weight_object, self.score_weight_semantic);
        if !(wo.is_finite() && ws.is_finite() && wo >= 0.0 && ws >= 0.0 && wo + ws > 0.0) {
            return Err(ConfigError::Weights);
        }
        Ok(())
    }

    /// Applies `key = value` pairs on top of `self`. Pairs are separated by
    /// newlines, `;` or `,`; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<(), ConfigError> {
        let pairs = text
            .lines()
            .enumerate()
            .flat_map(|(i, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split([';', ','])
                    .map(move |p| (i + 1, p.trim()))
                    .collect::<Vec<_>>()
            })
            .filter(|(_, p)| !p.is_empty());
        for (line, pair) in pairs {
            let (key, value) = pair
                .split_once(['=', ':'])
                .ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let slot = self
                .field_mut(key)
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            *slot = value.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
            })?;
        }
        self.validate()
    }

    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        config.apply_kv(text)?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::from_kv_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.field(key));
        }
        out
    }
}
