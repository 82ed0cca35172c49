//! End-to-end processing of one video's annotations into a document.

use crate::audio::{retrieve_sound, sound_query, spatialize_in, SoundCache, SoundField};
use crate::backends::{BackendError, Backends, CaptionRequest};
use crate::config::{ConfigError, PipelineConfig};
use crate::model::{
    validate_frames, AnnotationFile, AugmentedAdDocument, DescriptionSource, FrameRecord, Keyframe,
    ValidationError,
};
use crate::objects::{filter_detections, order_and_index, position_phrase, DescribedObject};
use crate::refine::{refine, RefineError, RefinementRequest};
use crate::segmenter::{chunk_range, embed_captions, pick_keyframe, score_chunk_embedded, segment_embedded};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Validate,
    Embed,
    Caption,
    Refine,
    Sound,
    Assemble,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Validate => "validate",
            Stage::Embed => "embed",
            Stage::Caption => "caption",
            Stage::Refine => "refine",
            Stage::Sound => "sound",
            Stage::Assemble => "assemble",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error("document invariant violated: {0}")]
    Invariant(String),
}

/// A stage failure with the frame and 1-based object index it happened at.
#[derive(Debug, Error)]
pub struct PipelineError {
    pub stage: Stage,
    pub frame_index: Option<u64>,
    pub object_index: Option<usize>,
    #[source]
    pub failure: StageFailure,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}`", self.stage)?;
        if let Some(i) = self.frame_index {
            write!(f, ", frame {i}")?;
        }
        if let Some(k) = self.object_index {
            write!(f, ", object {k}")?;
        }
        write!(f, ": {}", self.failure)
    }
}

impl PipelineError {
    fn at(stage: Stage, frame_index: Option<u64>, object_index: Option<usize>) -> impl FnOnce(StageFailure) -> Self {
        move |failure| Self { stage, frame_index, object_index, failure }
    }

    pub fn is_unavailable(&self) -> bool {
        matches!(self.failure, StageFailure::Backend(BackendError::Unavailable { .. }))
    }
}

fn describe_objects(
    frame: &FrameRecord,
    frame_description: &str,
    config: &PipelineConfig,
    backends: &Backends,
    cache: &SoundCache,
) -> Result<Vec<DescribedObject>, PipelineError> {
    let indexed = order_and_index(frame.detections.clone());
    let scene_labels: Vec<String> = indexed.iter().map(|(_, d)| d.label.clone()).collect();
    let field = SoundField::from(config);
    let mut objects = Vec::with_capacity(indexed.len());
    for (index, detection) in indexed {
        let at = |stage| PipelineError::at(stage, Some(frame.frame_index), Some(index));
        let raw_caption = backends
            .captioner
            .caption(&CaptionRequest {
                frame_index: frame.frame_index,
                focus: Some(detection.clone()),
                context_caption: Some(frame_description.to_string()),
            })
            .map_err(|e| at(Stage::Caption)(e.into()))?;
        let phrase = position_phrase(detection.centroid);
        let refined = refine(
            &RefinementRequest {
                frame_caption: frame_description.to_string(),
                scene_labels: scene_labels.clone(),
                raw_object_caption: raw_caption.clone(),
                position_phrase: phrase.to_string(),
            },
            backends.refiner.as_deref(),
        )
        .map_err(|e| at(Stage::Refine)(e.into()))?;
        let spatial = spatialize_in(field, detection.centroid, detection.depth_norm);
        let query = sound_query(&detection.label, &refined.text);
        let sound = retrieve_sound(&query, backends.sound.as_ref(), cache)
            .map_err(|e| at(Stage::Sound)(e.into()))?;
        objects.push(DescribedObject {
            index,
            label: detection.label.clone(),
            detection,
            raw_caption,
            refined_caption: refined.text,
            refinement_source: refined.source,
            position_phrase: phrase,
            spatial,
            sound,
        });
    }
    Ok(objects)
}

/// Runs every stage over one video and assembles its document.
///
/// Stages: validate, filter detections, embed captions once, segment, pick
/// one keyframe per chunk, then for each keyframe describe the frame (native
/// AD text, else a generated caption) and each kept object (focused caption,
/// refinement, position phrase, spatial parameters, sound).
pub fn process_annotations(
    annotations: &AnnotationFile,
    config: &PipelineConfig,
    backends: &Backends,
    cache: &SoundCache,
) -> Result<AugmentedAdDocument, PipelineError> {
    config.validate().map_err(|e| PipelineError::at(Stage::Config, None, None)(e.into()))?;
    let meta = &annotations.meta;
    let mut frames = validate_frames(meta, annotations.frames.clone())
        .map_err(|e| {
            let frame = match &e {
                ValidationError::MalformedAnnotation { frame_index, .. } => *frame_index,
                _ => None,
            };
            PipelineError::at(Stage::Validate, frame, None)(e.into())
        })?;
    for f in &mut frames {
        f.detections = filter_detections(&f.detections, config);
    }

    let embeddings = embed_captions(&frames, backends.embedder.as_ref())
        .map_err(|e| PipelineError::at(Stage::Embed, None, None)(e.into()))?;
    let chunks = segment_embedded(&frames, &embeddings, config);

    let mut keyframes = Vec::with_capacity(chunks.len());
    for chunk in chunks {
        let range = chunk_range(&chunk, &frames);
        let scores = score_chunk_embedded(&chunk, &frames, &embeddings[range.clone()], config);
        let chosen = pick_keyframe(&chunk, &frames, &scores, config);
        let frame = &frames[range.start + scores.iter().position(|s| s.frame_index == chosen).unwrap_or(0)];

        let (frame_description, source) = match frame.native_ad_index {
            Some(i) => (meta.native_ads[i].text.clone(), DescriptionSource::NativeAD),
            None => {
                let caption = backends
                    .captioner
                    .caption(&CaptionRequest { frame_index: frame.frame_index, focus: None, context_caption: None })
                    .map_err(|e| PipelineError::at(Stage::Caption, Some(frame.frame_index), None)(e.into()))?;
                (caption, DescriptionSource::Generated)
            }
        };
        let objects = describe_objects(frame, &frame_description, config, backends, cache)?;
        keyframes.push(Keyframe {
            frame_index: frame.frame_index,
            timestamp_s: frame.timestamp_s,
            frame_description,
            source,
            objects,
            chunk,
        });
    }

    let mut provenance = backends.provenance();
    provenance.insert("pipeline".into(), concat!("adforge/", env!("CARGO_PKG_VERSION")).into());
    let doc = AugmentedAdDocument {
        meta: meta.clone(),
        keyframes,
        pipeline_config: config.clone(),
        provenance,
    };
    doc.check_invariants()
        .map_err(|e| PipelineError::at(Stage::Assemble, None, None)(StageFailure::Invariant(e)))?;
    Ok(doc)
}
