use super::EvalError;
use crate::model::{BBox, Detection};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub label: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame_index: u64,
    pub objects: Vec<GroundTruthObject>,
}

/// Indices into the prediction list and the ground-truth object list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

/// Match tallies, summable across frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: usize,
    pub unmatched_pred: usize,
    pub unmatched_gt: usize,
}

impl MatchCounts {
    pub fn predicted(&self) -> usize {
        self.matched + self.unmatched_pred
    }

    pub fn ground_truth(&self) -> usize {
        self.matched + self.unmatched_gt
    }

    pub fn precision(&self) -> Result<f64, EvalError> {
        match self.predicted() {
            0 => Err(EvalError::NoPredictions),
            n => Ok(self.matched as f64 / n as f64),
        }
    }

    pub fn recall(&self) -> Result<f64, EvalError> {
        match self.ground_truth() {
            0 => Err(EvalError::NoGroundTruth),
            n => Ok(self.matched as f64 / n as f64),
        }
    }
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.matched += rhs.matched;
        self.unmatched_pred += rhs.unmatched_pred;
        self.unmatched_gt += rhs.unmatched_gt;
    }
}

impl MatchResult {
    pub fn counts(&self) -> MatchCounts {
        MatchCounts {
            matched: self.matched.len(),
            unmatched_pred: self.unmatched_pred.len(),
            unmatched_gt: self.unmatched_gt.len(),
        }
    }
}

/// Intersection over union of two boxes; 0 for disjoint or degenerate boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Greedy matching. Predictions go in descending confidence (ties by list
/// position); each claims the unclaimed same-label ground-truth object with
/// the highest IoU at or above `iou_threshold`, lower index on ties.
pub fn match_objects(pred: &[Detection], gt: &GroundTruthFrame, iou_threshold: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].confidence.total_cmp(&pred[a].confidence));

    let mut taken = vec![false; gt.objects.len()];
    let mut result = MatchResult::default();
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, obj) in gt.objects.iter().enumerate() {
            if taken[g] || obj.label != pred[p].label {
                continue;
            }
            let overlap = iou(&pred[p].bbox, &obj.bbox);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        match best {
            Some((g, _)) => {
                taken[g] = true;
                result.matched.push((p, g));
            }
            None => result.unmatched_pred.push(p),
        }
    }
    result.matched.sort_unstable();
    result.unmatched_pred.sort_unstable();
    result.unmatched_gt = (0..gt.objects.len()).filter(|&g| !taken[g]).collect();
    result
}

/// Matched predictions over all predictions.
pub fn precision(m: &MatchResult) -> Result<f64, EvalError> {
    m.counts().precision()
}

/// Matched ground-truth objects over all ground-truth objects.
pub fn recall(m: &MatchResult) -> Result<f64, EvalError> {
    m.counts().recall()
}
