use std::path::PathBuf;

use thiserror::Error;

use crate::spatial::Point2;

/// Errors raised anywhere in the linkage, growth, simulation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no records to link")]
    EmptyInput,

    #[error("no candidate latents found for record {record} even after growing the box to {half_width:.3} m")]
    CandidateSearchFailed { record: usize, half_width: f64 },

    #[error("non-finite value during iteration {iteration}: {what}")]
    NumericalFailure { iteration: usize, what: String },

    #[error("skew-t tail parameter must exceed 2, got {0}")]
    InvalidTailParameter(f64),

    #[error("growth sampler mixed poorly: block `{block}` accepted {acceptance:.4} of burn-in proposals")]
    PoorMixing {
        block: String,
        acceptance: f64,
        trace: Vec<Vec<f64>>,
    },

    #[error("covariate unavailable at ({}, {}): {reason}", .location.x, .location.y)]
    CovariateUnavailable { location: Point2, reason: String },

    #[error("covariate `{0}` has zero variance over the analysis domain")]
    DegenerateCovariate(String),

    #[error("no usable linkage draws: all {0} sampled draws produced too few growth clusters")]
    NoUsableDraws(usize),

    #[error("point packing stalled after {0} consecutive rejections")]
    PackingInfeasible(usize),

    #[error("too few growth clusters: need at least {needed}, have {have}")]
    TooFewClusters { needed: usize, have: usize },

    #[error("parse error at {path}:{row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("validation error{}: {message}", .row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Validation { row: Option<usize>, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code printed by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyInput => "EMPTY_INPUT",
            Error::CandidateSearchFailed { .. } => "CANDIDATE_SEARCH_FAILED",
            Error::NumericalFailure { .. } => "NUMERICAL_FAILURE",
            Error::InvalidTailParameter(_) => "INVALID_TAIL_PARAMETER",
            Error::PoorMixing { .. } => "POOR_MIXING",
            Error::CovariateUnavailable { .. } => "COVARIATE_UNAVAILABLE",
            Error::DegenerateCovariate(_) => "DEGENERATE_COVARIATE",
            Error::NoUsableDraws(_) => "NO_USABLE_DRAWS",
            Error::PackingInfeasible(_) => "PACKING_INFEASIBLE",
            Error::TooFewClusters { .. } => "TOO_FEW_CLUSTERS",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Schema { .. } => "SCHEMA_ERROR",
            Error::Validation { .. } => "VALIDATION_ERROR",
            Error::Config(_) => "CONFIG_ERROR",
            Error::Archive(_) => "ARCHIVE_ERROR",
            Error::Io(_) => "IO_ERROR",
            Error::Json(_) => "JSON_ERROR",
            Error::Csv(_) => "CSV_ERROR",
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure { .. }
                | Error::PoorMixing { .. }
                | Error::CandidateSearchFailed { .. }
                | Error::PackingInfeasible(_)
                | Error::NoUsableDraws(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
