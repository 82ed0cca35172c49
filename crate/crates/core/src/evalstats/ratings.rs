//! Seven-point grader ratings, read from CSV.
//!
//! Columns: `description_id,grader_id,score` plus an optional `condition`
//! naming the pipeline variant that produced the description.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const RATING_SCALE: u32 = 7;

/// Condition assigned to rows without a `condition` column.
pub const DEFAULT_CONDITION: &str = "all";

#[derive(Debug, Error)]
pub enum RatingsError {
    #[error("reading ratings: {0}")]
    Io(#[from] std::io::Error),
    #[error("ratings CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: score {score} outside 1..=7")]
    ScoreOutOfRange { row: usize, score: i64 },
    #[error("row {row}: empty {field}")]
    EmptyField { row: usize, field: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub description_id: String,
    pub grader_id: String,
    pub score: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

impl RatingRecord {
    pub fn condition(&self) -> &str {
        self.condition.as_deref().unwrap_or(DEFAULT_CONDITION)
    }
}

#[derive(Deserialize)]
struct Row {
    description_id: String,
    grader_id: String,
    score: i64,
    #[serde(default)]
    condition: Option<String>,
}

pub fn parse_ratings(text: &str) -> Result<Vec<RatingRecord>, RatingsError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row?;
        let line = i + 2;
        if !(1..=RATING_SCALE as i64).contains(&row.score) {
            return Err(RatingsError::ScoreOutOfRange { row: line, score: row.score });
        }
        if row.description_id.is_empty() {
            return Err(RatingsError::EmptyField { row: line, field: "description_id" });
        }
        if row.grader_id.is_empty() {
            return Err(RatingsError::EmptyField { row: line, field: "grader_id" });
        }
        out.push(RatingRecord {
            description_id: row.description_id,
            grader_id: row.grader_id,
            score: row.score as u32,
            condition: row.condition.filter(|c| !c.is_empty()),
        });
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>, RatingsError> {
    parse_ratings(&std::fs::read_to_string(path)?)
}

/// Mean score per description over all graders who rated it.
pub fn aggregate_ratings(records: &[RatingRecord]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry(r.description_id.clone()).or_default();
        e.0 += r.score as f64;
        e.1 += 1;
    }
    sums.into_iter().map(|(id, (s, n))| (id, s / n as f64)).collect()
}
