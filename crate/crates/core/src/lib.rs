//! Layered, explorable audio descriptions for video.
//!
//! The pipeline turns per-frame annotations into an [`AugmentedAdDocument`]:
//! keyframes chosen per segment, a frame-level description for each, and
//! indexed objects with refined captions, position phrases, spatial audio
//! parameters and a sound asset. [`evalstats`] holds the evaluation harness.

pub mod audio;
pub mod backends;
pub mod config;
pub mod evalstats;
pub mod model;
pub mod objects;
pub mod refine;
pub mod segmenter;
pub mod service;
pub mod vocab;

pub use config::{ConfigError, PipelineConfig};
pub use model::{
    AnnotationFile, AugmentedAdDocument, BBox, DescriptionSource, Detection, FrameRecord, Keyframe,
    NativeAd, Point, ValidationError, VideoMeta,
};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/annotations.md")]
    mod annotations {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/objects-and-audio.md")]
    mod objects_and_audio {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
