use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    /// A parameter violates a documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A step size or resolution guard is violated.
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("singular response: {0}")]
    Singular(String),

    /// The spectrum has no interior local minimum of |Im chi|.
    #[error("no spectral dip: {0}")]
    NoDip(String),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    /// The field reaches the periodic domain edges.
    #[error("boundary contamination: {0}")]
    BoundaryContamination(String),

    #[error("undefined centroid: field has zero norm")]
    UndefinedCentroid,

    /// The Gaussian lost normalizability during symbolic evolution.
    #[error("invalid evolution: {0}")]
    InvalidEvolution(String),
}
