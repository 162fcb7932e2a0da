use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid element {num}/{den}")]
    InvalidElement { num: String, den: String },

    #[error("({0}, {1}, {2}) is not a triangle of the Farey tessellation")]
    NotATribone(String, String, String),

    #[error("matrix has determinant {0}, expected 1")]
    BadDeterminant(String),

    #[error("matrix {0} is not hyperbolic: |trace| <= 2")]
    NotHyperbolic(String),

    #[error("triple is not pairwise distinct")]
    DegenerateTriple,

    #[error("rejection budget of {budget} draws exceeded for triple {triple}")]
    RejectionBudgetExceeded { budget: usize, triple: String },

    #[error("non-finite density encountered: {0}")]
    NonFiniteDensity(String),

    #[error("chain search failed at {step} after {attempts} attempts")]
    SearchBudgetExceeded { step: String, attempts: usize },

    #[error("degenerate edge at quadribone {quadribone}")]
    DegenerateEdge { quadribone: String },

    #[error("bend at quadribone {quadribone} is not locally convex")]
    NotLocallyConvex { quadribone: String },

    #[error("chord error {chord_error:.3e} exceeds tolerance {tolerance:.3e}; raise the resolution")]
    ResolutionTooLow { chord_error: f64, tolerance: f64 },

    #[error("configuration materialized to depth {available}, {required} required")]
    InsufficientDepth { required: usize, available: usize },

    #[error("sampling failed while gluing quadribone {quadribone}: {source}")]
    Glue {
        quadribone: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
