use crate::lattice::Site;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by lattice construction, field assembly and the samplers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension must be 1 or 2, got {0}")]
    InvalidDimension(usize),
    #[error("half extent must be a positive multiple of 4, got {0}")]
    InvalidHalfExtent(i64),
    #[error("decimation requires an even half extent, got {0}")]
    OddHalfExtent(i64),
    #[error("coupling strength must be nonnegative, got {0}")]
    NegativeCoupling(f64),
    #[error("truncation radius must be positive, got {0}")]
    InvalidTruncation(i64),
    #[error("coupling family {family} does not apply in dimension {dimension}")]
    FamilyDimensionMismatch { family: String, dimension: usize },
    #[error("coupling is undefined for i = j")]
    SelfCoupling,
    #[error("nearest-neighbour couplings have no truncation tail")]
    NoTail,
    #[error("constraint is missing an angle for frozen site ({0}, {1})")]
    MissingFrozenAngle(i64, i64),
    #[error("site ({}, {}) is outside the box", .0[0], .0[1])]
    SiteOutsideBox(Site),
    #[error("site ({}, {}) is not a free site of this model", .0[0], .0[1])]
    SiteNotFree(Site),
    #[error("configuration lattice does not match the model lattice")]
    BoxMismatch,
    #[error("invalid Monte Carlo parameters: {0}")]
    InvalidMcParams(String),
    #[error("annulus radii must be increasing multiples of 4, got {0:?}")]
    InvalidRadii(Vec<i64>),
    #[error("gap threshold delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("insufficient effective samples: n_effective = {0:.1} < 100")]
    InsufficientSamples(f64),
    #[error("eigensolver failed: {0}")]
    EigenFailed(String),
    #[error("configuration file is invalid: {0}")]
    Config(String),
    #[error("configuration violates preconditions:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
