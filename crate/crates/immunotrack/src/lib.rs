//! Immune-inspired trend tracking and forecasting for price time series.
//!
//! A population of variable-length "trackers" evolves against a stream of
//! antigens (windows of recent price movements) via clonal selection:
//! bind, proliferate proportionally to affinity, mutate, and die off.
//! The live population acts as short-term memory; dominant trackers are
//! promoted into a time-ordered tracker sequence that serves as long-term
//! memory, gets mined for repeating patterns, and drives forecasts.
//!
//! Module map:
//! - [`ingest`]: price series loading, movement deltas, antigens, synthetic data
//! - [`affinity`]: tracker/antigen binding score and threshold decision
//! - [`engine`]: the clonal selection loop over the short-term pool
//! - [`memory`]: the tracker sequence, signatures, and pattern generalization
//! - [`forecast`]: sequence-based forecasting and walk-forward evaluation
//! - [`config`]: flat key=value run configuration
//! - [`report`]: deterministic JSON report emission and loading

pub mod affinity;
pub mod config;
pub mod engine;
pub mod forecast;
pub mod ingest;
pub mod memory;
pub mod report;
pub mod rng;

use thiserror::Error;

/// Top-level error: every module error, qualified by the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingest: {0}")]
    Ingest(#[from] ingest::IngestError),
    #[error("affinity: {0}")]
    Affinity(#[from] affinity::AffinityError),
    #[error("engine: {0}")]
    Engine(#[from] engine::EngineError),
    #[error("memory: {0}")]
    Memory(#[from] memory::MemoryError),
    #[error("forecast: {0}")]
    Forecast(#[from] forecast::ForecastError),
    #[error("config: {0}")]
    Config(#[from] config::ConfigError),
    #[error("report: {0}")]
    Report(#[from] report::ReportError),
}

pub type Result<T> = std::result::Result<T, Error>;
