use crate::model::{validate_frames, AnnotationFile, ValidationError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("reading annotations: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Malformed(#[from] ValidationError),
}

/// Parses and validates an annotation document from JSON text.
pub fn parse_annotations(text: &str) -> Result<AnnotationFile, AnnotationError> {
    let raw: AnnotationFile = serde_json::from_str(text).map_err(|e| AnnotationError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let frames = validate_frames(&raw.meta, raw.frames)?;
    Ok(AnnotationFile {
        meta: raw.meta,
        frames,
    })
}

/// Loads one video's annotation file; frames come back validated and sorted.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationFile, AnnotationError> {
    parse_annotations(&std::fs::read_to_string(path)?)
}
