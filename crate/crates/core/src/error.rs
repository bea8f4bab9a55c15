use thiserror::Error;

/// Errors raised by layout construction, covariance processing and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("M={m} and N={n} are not coprime")]
    NotCoprime { m: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spacing d={d} m exceeds lambda/4={quarter} m")]
    AmbiguousSpacing { d: f64, quarter: f64 },

    #[error("dense layout needs an odd sensor count, got {0}")]
    EvenSensorCount(usize),

    #[error("sensor position {position} m is not on the {d} m grid")]
    OffGrid { position: f64, d: f64 },

    #[error("layout is not symmetric about the origin")]
    AsymmetricLayout,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("snapshot {0} has a zero-energy source vector")]
    ZeroSourceEnergy(usize),

    #[error("coarray lag {0} missing from the consecutive segment")]
    MissingLag(i64),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("no targets given")]
    NoTargets,

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
