use thiserror::Error;

/// Errors surfaced by the statistical and numerical routines.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid aspect ratio y = {0}: must be positive and finite")]
    InvalidAspectRatio(f64),

    #[error("subcritical spike: {what} = {value} is not above the detection threshold {threshold}")]
    Subcritical {
        what: &'static str,
        value: f64,
        threshold: f64,
    },

    #[error("eigenvalue {value} is not separated from the bulk edge {edge}")]
    NotSeparatedFromBulk { value: f64, edge: f64 },

    #[error("argument z = {0} lies inside the bulk support or at zero")]
    InsideBulk(f64),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid entry law: {0}")]
    InvalidLaw(String),

    #[error("direction columns are not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("overlapping spikes: d[{i}] = {di} and d[{j}] = {dj} coincide with nonzero overlap outside the target set")]
    OverlappingSpikes { i: usize, j: usize, di: f64, dj: f64 },

    #[error("missing direction information: {0}")]
    MissingDirections(String),

    #[error("covariance matrix is not positive semi-definite (min eigenvalue {min_eig:.3e}, floor {floor:.3e})")]
    NotPsd { min_eig: f64, floor: f64 },

    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("variance estimate V1 = {0} is not positive; parameter regime failure")]
    NonPositiveVariance(f64),

    #[error("mixture simulation needs at least 1000 draws, got {0}")]
    TooFewDraws(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV at line {line}, field {field}: {message}")]
    Csv {
        line: usize,
        field: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
