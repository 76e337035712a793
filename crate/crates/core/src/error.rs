//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Every failure the library can report.
///
/// Each variant maps to a stable category name and process exit code so the
/// command-line front end can report failures without string matching.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error("episode already terminal at step {step}")]
    EpisodeDone { step: usize },
    #[error("token sequence has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("search space of {size} sequences exceeds budget {budget}")]
    Budget { size: u128, budget: u128 },
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("reward group has zero variance (std {std:e})")]
    ZeroVarianceGroup { std: f64 },
    #[error("every rollout group was filtered at step {step}")]
    StarvedBatch { step: usize },
    #[error("out of range: {0}")]
    Range(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate record (query {query_id}, traj {traj}, t {t}) at line {line}")]
    DuplicateRecord {
        query_id: String,
        traj: usize,
        t: usize,
        line: usize,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category tag printed by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            LabError::Index(_) => "index",
            LabError::Config(_) => "config",
            LabError::Shape(_) => "shape",
            LabError::Numerics(_) => "numerics",
            LabError::EpisodeDone { .. } => "episode-done",
            LabError::Length { .. } => "length",
            LabError::Budget { .. } => "budget",
            LabError::Distribution(_) => "distribution",
            LabError::EmptyInput(_) => "empty-input",
            LabError::ZeroVarianceGroup { .. } => "zero-variance",
            LabError::StarvedBatch { .. } => "starved-batch",
            LabError::Range(_) => "range",
            LabError::Parse { .. } => "parse",
            LabError::DuplicateRecord { .. } => "duplicate-record",
            LabError::Io { .. } => "io",
        }
    }

    /// Process exit code for this error class. Zero is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Io { .. } => 3,
            LabError::Parse { .. } => 4,
            LabError::DuplicateRecord { .. } => 5,
            LabError::EmptyInput(_) => 6,
            LabError::Index(_) => 10,
            LabError::Shape(_) => 11,
            LabError::Numerics(_) => 12,
            LabError::EpisodeDone { .. } => 13,
            LabError::Length { .. } => 14,
            LabError::Budget { .. } => 15,
            LabError::Distribution(_) => 16,
            LabError::ZeroVarianceGroup { .. } => 17,
            LabError::StarvedBatch { .. } => 18,
            LabError::Range(_) => 19,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
