//! Batch orchestration for the scenegrasp toolkit: configuration files,
//! dataset manifests, deterministic fixtures and resumable pipeline runs.

pub mod config;
pub mod fixtures;
pub mod io;
pub mod logging;
pub mod manifest;
pub mod run;
pub mod seed;

use std::path::PathBuf;

use thiserror::Error;

use scenegrasp_core::contact::ContactError;
use scenegrasp_core::floor::FloorError;
use scenegrasp_core::geometry::GeometryError;
use scenegrasp_core::penetration::PenetrationError;
use scenegrasp_core::synth::SynthError;

pub use config::PipelineConfig;
pub use manifest::{Dataset, SampleManifest, SampleSpec};
pub use run::{evaluate_dataset, run_pipeline, RunSummary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid dataset manifest: {0}")]
    Manifest(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Floor(#[from] FloorError),
    #[error(transparent)]
    Penetration(#[from] PenetrationError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Contact(#[from] ContactError),
}

impl PipelineError {
    /// Errors caused by the invocation itself rather than by a sample.
    pub fn is_usage(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Manifest(_))
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
