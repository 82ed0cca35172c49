//! Evaluation harness: label precision/recall against ground truth, grader
//! rating aggregation and the significance tests used to compare conditions.

pub mod groundtruth;
pub mod matching;
pub mod ratings;
pub mod report;
pub mod stats;

pub use groundtruth::{load_ground_truth, parse_labelme, GroundTruthError, GroundTruthVideo};
pub use matching::{
    iou, match_objects, precision, recall, GroundTruthFrame, GroundTruthObject, MatchCounts,
    MatchResult,
};
pub use ratings::{aggregate_ratings, load_ratings, parse_ratings, RatingRecord, RatingsError};
pub use report::{eval_report, evaluate_video, EvalReport, RatingStats, ReportError, VideoEval};
pub use stats::{
    mean, one_way_anova, sample_sd, weighted_kappa, wilcoxon_signed_rank, AnovaResult,
    StatsError, WilcoxonResult,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no predictions to score")]
    NoPredictions,
    #[error("no ground-truth objects to score against")]
    NoGroundTruth,
}
