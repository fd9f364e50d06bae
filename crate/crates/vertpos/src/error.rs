//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("feature '{name}' has zero variance on the fit data")]
    ZeroVarianceFeature { name: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trace too short: need at least {needed} observations, got {got}")]
    TraceTooShort { needed: usize, got: usize },

    #[error("altitude {altitude} outside quantization range [{h_min}, {h_max}]")]
    AltitudeOutOfRange {
        altitude: f64,
        h_min: f64,
        h_max: f64,
    },

    #[error("class {class} outside [1, {num_classes}]")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("label {label} outside [1, {num_classes}]")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("enumerate mode requires exactly C({dim}, {subset_size}) = {expected} subsets, requested {requested}")]
    BadCombination {
        dim: usize,
        subset_size: usize,
        expected: usize,
        requested: usize,
    },

    #[error("ensemble contains no models")]
    EmptyEnsemble,

    #[error("verdicts do not align with trace: expected {expected} entries, got {got}")]
    IndexMismatch { expected: usize, got: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("pressure must be positive, got {0} Pa")]
    NonPositivePressure(f64),

    #[error("altitude {0} m is at or above the barometric model ceiling (44330.8 m)")]
    AltitudeAboveModelCeiling(f64),

    #[error("coordinate out of range: {name} = {value}")]
    CoordinateOutOfRange { name: &'static str, value: f64 },

    #[error("observation is missing required field '{field}'")]
    MissingField { field: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed model file: {0}")]
    BadModelFile(String),
}
