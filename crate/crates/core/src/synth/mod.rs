//! Synthetic IOS / CBCT arch pairs with ground truth, the accuracy metrics,
//! and the benchmark harness tying them to the pipeline.

mod bench;
mod generator;
mod metrics;
mod tooth;

use thiserror::Error;

pub use bench::{evaluate, run_benchmark, run_benchmark_observed, tooth_landmark_errors, IcpSummary, LabelView, MetricsReport, RecoveryError, StageMetrics, ToothMetrics};
pub use generator::{generate_arch_pair, random_offset, GroundTruth, LandmarkPair, SynthConfig, SynthPair};
pub use metrics::{landmark_error, percentile, surface_distances, surface_error};
pub use tooth::{class_dimensions, tooth_mesh, Cusp, ToothMesh, ToothShape};

use crate::arch::ArchError;
use crate::pipeline::PipelineError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),
    #[error("landmark lists differ in length ({src} vs {tgt})")]
    LengthMismatch { src: usize, tgt: usize },
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}
