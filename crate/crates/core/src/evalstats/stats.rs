//! Agreement and significance statistics for grader ratings.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("rating lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("score {score} outside 1..={scale}")]
    ScoreOutOfRange { score: u32, scale: u32 },
    #[error("scale must have at least 2 points")]
    InvalidScale,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("need at least two groups of two or more values each")]
    TooFewGroups,
    #[error("zero within-group variance with differing group means (p = {p_value})")]
    DegenerateVariance { p_value: f64 },
    #[error("non-finite input value")]
    NonFinite,
}

/// Cohen's kappa with quadratic weights `((i - j) / (k - 1))²` over a
/// `k`-point scale. Returns 1 when both graders used one identical value
/// throughout, where the expected disagreement is zero.
pub fn weighted_kappa(a: &[u32], b: &[u32], k: u32) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewItems { needed: 2, got: a.len() });
    }
    if k < 2 {
        return Err(StatsError::InvalidScale);
    }
    if let Some(&score) = a.iter().chain(b).find(|&&s| s < 1 || s > k) {
        return Err(StatsError::ScoreOutOfRange { score, scale: k });
    }
    let k = k as usize;
    let n = a.len() as f64;
    let mut observed = vec![vec![0.0; k]; k];
    let mut row = vec![0.0; k];
    let mut col = vec![0.0; k];
    for (&x, &y) in a.iter().zip(b) {
        let (i, j) = (x as usize - 1, y as usize - 1);
        observed[i][j] += 1.0 / n;
        row[i] += 1.0 / n;
        col[j] += 1.0 / n;
    }
    let mut disagreement = 0.0;
    let mut expected = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) / (k as f64 - 1.0)).powi(2);
            disagreement += w * observed[i][j];
            expected += w * row[i] * col[j];
        }
    }
    if expected <= f64::EPSILON {
        return Ok(1.0);
    }
    Ok(1.0 - disagreement / expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Positive when the positive differences `x - y` carry more rank.
    pub z: f64,
    pub p_two_sided: f64,
}

/// Average ranks (1-based) of `values`, ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Wilcoxon signed-rank test with the tie-corrected normal approximation.
/// Zero differences are dropped. `|W+ - mean|` is shrunk by a continuity
/// correction of 0.5 (floored at zero) before dividing by the SD.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<WilcoxonResult, StatsError> {
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let diffs: Vec<f64> = pairs.iter().map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();

    let n = diffs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = magnitudes.clone();
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let deviation = w_plus - mean;
    let z = deviation.signum() * (deviation.abs() - 0.5).max(0.0) / variance.sqrt();
    Ok(WilcoxonResult {
        w: w_plus.min(w_minus),
        w_plus,
        w_minus,
        n: diffs.len(),
        z,
        p_two_sided: normal_two_sided_p(z),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
}

/// Upper tail of the F distribution, through the regularized incomplete beta.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

/// One-way ANOVA across `groups`.
///
/// When every value is identical the result is `F = 0, p = 1`. When the
/// groups are internally constant but their means differ, the F statistic is
/// unbounded and [`StatsError::DegenerateVariance`] reports `p = 0`.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(StatsError::TooFewGroups);
    }
    if groups.iter().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let scale: f64 = groups.iter().flatten().map(|x| x * x).sum::<f64>().max(1.0);
    let (df_between, df_within) = (k - 1, n - k);
    if ss_within <= f64::EPSILON * scale {
        if ss_between <= f64::EPSILON * scale {
            return Ok(AnovaResult {
                f: 0.0,
                df_between,
                df_within,
                p: 1.0,
                ss_between: 0.0,
                ss_within: 0.0,
            });
        }
        return Err(StatsError::DegenerateVariance { p_value: 0.0 });
    }
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p: f_survival(f, df_between as f64, df_within as f64),
        ss_between,
        ss_within,
    })
}

/// Arithmetic mean; `None` for no values.
pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n - 1 denominator); `None` below two values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}
