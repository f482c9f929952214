//! Core algorithms for inferring alt-text of mobile UI icons from a partial
//! screen: view-hierarchy parsing, icon heuristics, icon-context extraction,
//! prompt and fine-tuning record assembly, caption metrics and dataset
//! statistics.
//!
//! The crate is `no_std` and only needs an allocator. File formats, model
//! providers and the command-line driver live in the `alttext` crate.

#![no_std]

extern crate alloc;

pub mod context;
pub mod icon;
pub mod metrics;
pub mod prompt;
pub mod raster;
pub mod stats;
pub mod vh;

pub use context::{extract_context, normalize_resource_id, serialize_context, IconContext};
pub use icon::{crop_rect_for, detect_icons, shape_ok, CropRect, IconCandidate, ShapeFilterConfig};
pub use metrics::{evaluate_corpus, CorpusItem, MetricReport, TokenizerConfig};
pub use prompt::{assign_class, build_prompt, sample_finetune_set, ClassVocab, FineTuneRecord};
pub use vh::{parse_screen, Bounds, NodePath, Screen, UiNode};
