//! Evaluation report: per-video label precision/recall with their mean and
//! sample SD across videos, and an optional block of rating statistics.

use super::groundtruth::GroundTruthVideo;
use super::matching::{match_objects, MatchCounts};
use super::ratings::{aggregate_ratings, RatingRecord, RATING_SCALE};
use super::stats::{mean, one_way_anova, sample_sd, weighted_kappa, StatsError};
use crate::config::PipelineConfig;
use crate::model::AnnotationFile;
use crate::objects::filter_detections;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no predictions for ground-truth video `{0}`")]
    MissingPredictions(String),
    #[error("no ground-truth videos")]
    NoGroundTruth,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEval {
    pub video_id: String,
    pub frames_evaluated: usize,
    pub counts: MatchCounts,
    /// `None` when the video has no kept predictions.
    pub precision: Option<f64>,
    /// `None` when the video has no ground-truth objects.
    pub recall: Option<f64>,
}

/// Mean and sample SD over videos; SD is `None` below two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        Self { mean: mean(values), sd: sample_sd(values), n: values.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: String,
    pub descriptions: usize,
    pub average_rating: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub grader_a: String,
    pub grader_b: String,
    pub items: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    /// `None` when within-condition variance is zero but the means differ.
    pub f: Option<f64>,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingStats {
    pub conditions: Vec<ConditionRow>,
    pub kappa: Vec<KappaRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anova: Option<AnovaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub videos: Vec<VideoEval>,
    pub precision: Summary,
    pub recall: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratings: Option<RatingStats>,
}

/// Scores one video. Only frames present in the ground truth count;
/// predictions are filtered with `config` first, and a ground-truth frame
/// with no prediction frame contributes only misses.
pub fn evaluate_video(pred: &AnnotationFile, gt: &GroundTruthVideo, config: &PipelineConfig) -> VideoEval {
    let mut counts = MatchCounts::default();
    for gt_frame in &gt.frames {
        let kept = pred
            .frames
            .iter()
            .find(|f| f.frame_index == gt_frame.frame_index)
            .map(|f| filter_detections(&f.detections, config))
            .unwrap_or_default();
        counts += match_objects(&kept, gt_frame, config.iou_match_threshold).counts();
    }
    VideoEval {
        video_id: gt.video_id.clone(),
        frames_evaluated: gt.frames.len(),
        counts,
        precision: counts.precision().ok(),
        recall: counts.recall().ok(),
    }
}

fn rating_stats(records: &[RatingRecord]) -> Result<RatingStats, StatsError> {
    let means = aggregate_ratings(records);
    let mut by_condition: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        by_condition
            .entry(r.condition())
            .or_default()
            .insert(&r.description_id, means[&r.description_id]);
    }
    let groups: Vec<(String, Vec<f64>)> = by_condition
        .into_iter()
        .map(|(c, m)| (c.to_string(), m.into_values().collect()))
        .collect();
    let conditions = groups
        .iter()
        .map(|(c, v)| ConditionRow {
            condition: c.clone(),
            descriptions: v.len(),
            average_rating: mean(v).unwrap_or(0.0),
            sd: sample_sd(v),
        })
        .collect();

    let mut by_grader: BTreeMap<&str, BTreeMap<&str, u32>> = BTreeMap::new();
    for r in records {
        by_grader.entry(&r.grader_id).or_default().insert(&r.description_id, r.score);
    }
    let graders: Vec<_> = by_grader.iter().collect();
    let mut kappa = Vec::new();
    for (i, (ga, sa)) in graders.iter().enumerate() {
        for (gb, sb) in &graders[i + 1..] {
            let (a, b): (Vec<u32>, Vec<u32>) =
                sa.iter().filter_map(|(d, s)| sb.get(d).map(|t| (*s, *t))).unzip();
            if a.len() >= 2 {
                kappa.push(KappaRow {
                    grader_a: ga.to_string(),
                    grader_b: gb.to_string(),
                    items: a.len(),
                    kappa: weighted_kappa(&a, &b, RATING_SCALE)?,
                });
            }
        }
    }

    let anova = if groups.len() >= 2 && groups.iter().all(|(_, v)| v.len() >= 2) {
        let values: Vec<Vec<f64>> = groups.iter().map(|(_, v)| v.clone()).collect();
        let n: usize = values.iter().map(Vec::len).sum();
        Some(match one_way_anova(&values) {
            Ok(r) => AnovaRow { f: Some(r.f), df_between: r.df_between, df_within: r.df_within, p: r.p },
            Err(StatsError::DegenerateVariance { p_value }) => AnovaRow {
                f: None,
                df_between: values.len() - 1,
                df_within: n - values.len(),
                p: p_value,
            },
            Err(e) => return Err(e),
        })
    } else {
        None
    };
    Ok(RatingStats { conditions, kappa, anova })
}

/// Builds the report. Every ground-truth video needs a prediction file with
/// the same `video_id`; predicted videos without ground truth are ignored.
/// An empty `ratings` slice omits the rating block.
pub fn eval_report(
    predictions: &[AnnotationFile],
    ground_truth: &[GroundTruthVideo],
    ratings: &[RatingRecord],
    config: &PipelineConfig,
) -> Result<EvalReport, ReportError> {
    if ground_truth.is_empty() {
        return Err(ReportError::NoGroundTruth);
    }
    let mut videos = Vec::new();
    for gt in ground_truth {
        let pred = predictions
            .iter()
            .find(|p| p.meta.video_id == gt.video_id)
            .ok_or_else(|| ReportError::MissingPredictions(gt.video_id.clone()))?;
        videos.push(evaluate_video(pred, gt, config));
    }
    let precisions: Vec<f64> = videos.iter().filter_map(|v| v.precision).collect();
    let recalls: Vec<f64> = videos.iter().filter_map(|v| v.recall).collect();
    Ok(EvalReport {
        iou_threshold: config.iou_match_threshold,
        precision: Summary::of(&precisions),
        recall: Summary::of(&recalls),
        videos,
        ratings: if ratings.is_empty() { None } else { Some(rating_stats(ratings)?) },
    })
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = self.videos.iter().map(|v| v.video_id.len()).max().unwrap_or(0).max(9);
        let _ = writeln!(out, "Label precision and recall (IoU >= {})", self.iou_threshold);
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:>5}  {:>5}  {:>7}  {:>9}  {:>6}",
            "video", "frames", "pred", "gt", "matched", "precision", "recall"
        );
        for v in &self.videos {
            let _ = writeln!(
                out,
                "{:<w$}  {:>6}  {:>5}  {:>5}  {:>7}  {:>9}  {:>6}",
                v.video_id,
                v.frames_evaluated,
                v.counts.predicted(),
                v.counts.ground_truth(),
                v.counts.matched,
                num(v.precision),
                num(v.recall)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<9}  {:>6}  {:>6}", "", "Mean", "SD");
        for (name, s) in [("Precision", &self.precision), ("Recall", &self.recall)] {
            let _ = writeln!(out, "{:<9}  {:>6}  {:>6}", name, num(s.mean), num(s.sd));
        }
        if let Some(r) = &self.ratings {
            let cw = r.conditions.iter().map(|c| c.condition.len()).max().unwrap_or(0).max(9);
            let _ = writeln!(out);
            let _ = writeln!(out, "Description ratings (1-7)");
            let _ = writeln!(out, "{:<cw$}  {:>4}  {:>14}  {:>6}", "condition", "n", "Average Rating", "SD");
            for c in &r.conditions {
                let _ = writeln!(
                    out,
                    "{:<cw$}  {:>4}  {:>14.3}  {:>6}",
                    c.condition,
                    c.descriptions,
                    c.average_rating,
                    num(c.sd)
                );
            }
            for k in &r.kappa {
                let _ = writeln!(
                    out,
                    "weighted kappa {} vs {} (n = {}): {:.3}",
                    k.grader_a, k.grader_b, k.items, k.kappa
                );
            }
            if let Some(a) = &r.anova {
                let f = a.f.map_or_else(|| "inf".to_string(), |f| format!("{f:.3}"));
                let _ = writeln!(out, "one-way ANOVA F({}, {}) = {}, p = {:.4}", a.df_between, a.df_within, f, a.p);
            }
        }
        out
    }
}
