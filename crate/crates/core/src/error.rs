use thiserror::Error;

use crate::geometry::Basis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {0} has zero norm and cannot be normalized")]
    ZeroVectorRow(usize),

    #[error("vectors are rank deficient (effective rank {effective_rank})")]
    RankDeficient { effective_rank: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("columns are not orthonormal (max Gram deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("vector already lies in the span of the basis")]
    AlreadyInSpan,

    #[error("at least two subspaces are required, got {0}")]
    TooFewSubspaces(usize),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("ambient dimension {p} is too small for {blocks} orthogonal blocks of dimension {d}")]
    AmbientTooSmall { p: usize, d: usize, blocks: usize },

    #[error("bases do not share the same ambient and subspace dimensions")]
    InconsistentBases,

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("class {class} has {size} members, at least {required} are required")]
    ClassTooSmall {
        class: usize,
        size: usize,
        required: usize,
    },

    #[error("row {row} has {found} neighbors, at least {required} are required")]
    TooFewNeighbors {
        row: usize,
        found: usize,
        required: usize,
    },

    #[error("row {row}: {source}")]
    InRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    /// Every point was covered before the requested number of subspaces was
    /// picked. The subspaces picked so far are returned with the error.
    #[error("all points covered after {} of {requested} subspaces", .subspaces.len())]
    Exhausted {
        requested: usize,
        subspaces: Vec<Basis>,
        picked: Vec<usize>,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("predicted cost {predicted:.3e} exceeds the budget {budget:.3e}")]
    BudgetExceeded { predicted: f64, budget: f64 },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
