//! Pipeline orchestration, document persistence and the HTTP API.

pub mod http;
pub mod pipeline;
pub mod store;

pub use http::{router, AppState};
pub use pipeline::{process_annotations, PipelineError, Stage, StageFailure};
pub use store::{DocumentStore, IndexEntry, StoreError, VideoSummary};
