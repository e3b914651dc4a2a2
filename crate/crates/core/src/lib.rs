//! Blind quality assessment of enhanced images and quality-driven
//! histogram enhancement.
//!
//! The library extracts 17 enhancement-aware features (contrast,
//! sharpness, brightness, colorfulness, naturalness), scores images with
//! a trained epsilon-SVR (the BIQME score), labels synthetic training
//! corpora with the full-reference C-PCQI metric, benchmarks metrics
//! against MOS files (PLC/SRC/KRC), and drives a two-stage histogram
//! enhancer (BOIEM) by maximizing the blind score.

pub mod boiem;
pub mod config;
pub mod cpcqi;
pub mod error;
pub mod evalstats;
pub mod features;
pub mod global;
pub mod image;
pub mod local;
pub mod phasecong;
pub mod svr;
pub mod trainset;

pub use config::ToolkitConfig;
pub use error::{Error, Result};
pub use features::{Extractor, FeatureVector, FEATURE_COUNT};
pub use image::{Histogram256, PlaneF, RasterImage};
pub use svr::{SvrHyper, SvrModel, TrainSet};
