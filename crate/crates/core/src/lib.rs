//! Near-drowning struggle detection in fixed-camera pool video.
//!
//! Frames are reduced per window to a merged matrix of per-pixel peak spectral
//! magnitude, segmented by 1-D k-means and connected components, described by
//! 18 segment features, quantized against percentile cut-offs and matched
//! against confidence-1 association rules.

pub mod config;
pub mod detection;
pub mod error;
pub mod features;
pub mod image;
pub mod ingest;
pub mod labels;
pub mod pipeline;
pub mod quantization;
pub mod rules;
pub mod segmentation;
pub mod spectral;
pub mod synth;
pub mod training;

pub use config::{PercentileSource, PipelineConfig, RunConfig};
pub use detection::{detect_stream, detect_window, DetectionTimeline, DetectorModel};
pub use error::{NeptuneError, Result};
pub use image::GrayImage;
pub use ingest::{FrameFormat, FrameWindow};
pub use spectral::{merge_window, DcPolicy, MergedMatrix};
pub use training::{train, TrainingOutcome};
