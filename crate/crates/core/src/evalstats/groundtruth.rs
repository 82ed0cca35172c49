//! Ground-truth ingestion: the native JSON layout and LabelMe XML.
//!
//! Native JSON is a [`GroundTruthVideo`] or a list of them. LabelMe input is
//! one XML file per frame; the frame index is the last run of digits in the
//! `<filename>` element (or the XML file name), and polygons are normalized
//! by `<imagesize>` into their bounding box.

use super::matching::{GroundTruthFrame, GroundTruthObject};
use crate::model::BBox;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("reading ground truth {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("ground truth JSON {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("LabelMe XML {path}: {reason}")]
    LabelMe { path: String, reason: String },
    #[error("no ground truth found under {0}")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthVideo {
    pub video_id: String,
    pub frames: Vec<GroundTruthFrame>,
}

impl GroundTruthVideo {
    pub fn frame(&self, frame_index: u64) -> Option<&GroundTruthFrame> {
        self.frames.iter().find(|f| f.frame_index == frame_index)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonInput {
    One(GroundTruthVideo),
    Many(Vec<GroundTruthVideo>),
}

fn labelme_err(path: &str, reason: impl Into<String>) -> GroundTruthError {
    GroundTruthError::LabelMe { path: path.to_string(), reason: reason.into() }
}

fn last_digits(s: &str) -> Option<u64> {
    let bytes = s.as_bytes();
    let end = bytes.iter().rposition(u8::is_ascii_digit)? + 1;
    let start = bytes[..end].iter().rposition(|b| !b.is_ascii_digit()).map_or(0, |i| i + 1);
    s[start..end].parse().ok()
}

fn child_text<'a>(node: roxmltree::Node<'a, 'a>, name: &str) -> Option<&'a str> {
    node.children().find(|c| c.has_tag_name(name)).and_then(|c| c.text()).map(str::trim)
}

fn child_f64(node: roxmltree::Node, name: &str, path: &str) -> Result<f64, GroundTruthError> {
    child_text(node, name)
        .ok_or_else(|| labelme_err(path, format!("missing <{name}>")))?
        .parse()
        .map_err(|_| labelme_err(path, format!("<{name}> is not a number")))
}

/// Parses one LabelMe frame. `source` names the input for errors and is the
/// fallback for the frame index.
pub fn parse_labelme(xml: &str, source: &str) -> Result<GroundTruthFrame, GroundTruthError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| labelme_err(source, e.to_string()))?;
    let root = doc.root_element();
    let frame_index = child_text(root, "filename")
        .and_then(last_digits)
        .or_else(|| {
            Path::new(source).file_stem().and_then(|s| s.to_str()).and_then(last_digits)
        })
        .ok_or_else(|| labelme_err(source, "no frame number in <filename> or file name"))?;
    let size = root
        .children()
        .find(|c| c.has_tag_name("imagesize"))
        .ok_or_else(|| labelme_err(source, "missing <imagesize>"))?;
    let rows = child_f64(size, "nrows", source)?;
    let cols = child_f64(size, "ncols", source)?;
    if rows <= 0.0 || cols <= 0.0 {
        return Err(labelme_err(source, "image size must be positive"));
    }

    let mut objects = Vec::new();
    for obj in root.children().filter(|c| c.has_tag_name("object")) {
        if child_text(obj, "deleted") == Some("1") {
            continue;
        }
        let label = child_text(obj, "name")
            .filter(|n| !n.is_empty())
            .ok_or_else(|| labelme_err(source, "object without <name>"))?
            .to_lowercase();
        let polygon = obj
            .children()
            .find(|c| c.has_tag_name("polygon"))
            .ok_or_else(|| labelme_err(source, format!("`{label}` has no <polygon>")))?;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut points = 0;
        for pt in polygon.children().filter(|c| c.has_tag_name("pt")) {
            let x = (child_f64(pt, "x", source)? / cols).clamp(0.0, 1.0);
            let y = (child_f64(pt, "y", source)? / rows).clamp(0.0, 1.0);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            points += 1;
        }
        if points < 3 || x1 <= x0 || y1 <= y0 {
            return Err(labelme_err(source, format!("`{label}` polygon is degenerate")));
        }
        objects.push(GroundTruthObject { label, bbox: BBox::new(x0, y0, x1 - x0, y1 - y0) });
    }
    Ok(GroundTruthFrame { frame_index, objects })
}

fn read(path: &Path) -> Result<String, GroundTruthError> {
    std::fs::read_to_string(path)
        .map_err(|source| GroundTruthError::Io { path: path.display().to_string(), source })
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>, GroundTruthError> {
    let io = |source| GroundTruthError::Io { path: dir.display().to_string(), source };
    let mut paths = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?;
    paths.sort();
    Ok(paths)
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn load_labelme_dir(dir: &Path, video_id: String) -> Result<Option<GroundTruthVideo>, GroundTruthError> {
    let mut frames = Vec::new();
    for path in sorted_entries(dir)? {
        if path.is_file() && has_ext(&path, "xml") {
            frames.push(parse_labelme(&read(&path)?, &path.display().to_string())?);
        }
    }
    if frames.is_empty() {
        return Ok(None);
    }
    frames.sort_by_key(|f| f.frame_index);
    Ok(Some(GroundTruthVideo { video_id, frames }))
}

fn load_json(path: &Path) -> Result<Vec<GroundTruthVideo>, GroundTruthError> {
    let text = read(path)?;
    let parsed: JsonInput = serde_json::from_str(&text)
        .map_err(|source| GroundTruthError::Json { path: path.display().to_string(), source })?;
    let mut videos = match parsed {
        JsonInput::One(v) => vec![v],
        JsonInput::Many(v) => v,
    };
    for v in &mut videos {
        v.frames.sort_by_key(|f| f.frame_index);
    }
    Ok(videos)
}

/// Loads ground truth from a JSON file or a directory. In a directory, each
/// `*.json` file contributes its videos, loose `*.xml` files form one video
/// named after the directory, and each subdirectory of `*.xml` files forms
/// one video named after the subdirectory.
pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthVideo>, GroundTruthError> {
    if !path.is_dir() {
        return load_json(path);
    }
    let mut videos = Vec::new();
    for entry in sorted_entries(path)? {
        if entry.is_file() && has_ext(&entry, "json") {
            videos.extend(load_json(&entry)?);
        } else if entry.is_dir() {
            let id = entry.file_name().unwrap_or_default().to_string_lossy().into_owned();
            videos.extend(load_labelme_dir(&entry, id)?);
        }
    }
    let id = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    videos.extend(load_labelme_dir(path, id)?);
    if videos.is_empty() {
        return Err(GroundTruthError::Empty(path.display().to_string()));
    }
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    Ok(videos)
}
