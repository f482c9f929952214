//! Std companion to `alttext-core`: provider clients with caching and
//! spend limits, image and table IO, configuration, run manifests and the
//! pipeline commands behind the `alttext` binary.

pub mod config;
pub mod formats;
pub mod imageio;
pub mod manifest;
pub mod pipeline;
pub mod providers;


pub use config::PipelineConfig;
pub use pipeline::{ExitStatus, PipelineError};
