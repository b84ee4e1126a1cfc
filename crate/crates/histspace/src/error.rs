//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction and verification routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not hermitian (residual {residual:.3e} > tol {tol:.3e})")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("matrix is not idempotent (residual {residual:.3e} > tol {tol:.3e})")]
    NotIdempotent { residual: f64, tol: f64 },

    #[error("trace {trace:.6} is not close to an integer rank")]
    NonIntegerRank { trace: f64 },

    #[error("basis columns are not orthonormal (residual {residual:.3e})")]
    NotOrthonormal { residual: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("zero vector where a nonzero state is required")]
    ZeroState,

    #[error("chain of subspaces is not nested (neither increasing nor decreasing)")]
    NonNestedChain,

    #[error(
        "partition cells do not sum to the identity (residual {residual:.3e} > tol {tol:.3e})"
    )]
    PartitionSum { residual: f64, tol: f64 },

    #[error("partition cells overlap at time {time} (residual {residual:.3e} > tol {tol:.3e})")]
    PartitionOverlap {
        time: String,
        residual: f64,
        tol: f64,
    },

    #[error("duplicate label `{0}` in partition")]
    DuplicateLabel(String),

    #[error("empty partition")]
    EmptyPartition,

    #[error("duplicate time `{0}` in analyser")]
    DuplicateTime(String),

    #[error("unknown time `{0}`")]
    UnknownTime(String),

    #[error("unknown label `{label}` at time {time}")]
    UnknownLabel { time: String, label: String },

    #[error("duplicate time `{0}` in assignment")]
    DuplicateAssignment(String),

    #[error("cell split for label `{label}` at time {time} does not sum to the parent cell (residual {residual:.3e})")]
    SplitSum {
        time: String,
        label: String,
        residual: f64,
    },

    #[error("label grouping at time {0} does not partition the label set")]
    InvalidGrouping(String),

    #[error("refinement map is inconsistent: {0}")]
    InvalidRefinement(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid scenario parameter: {0}")]
    InvalidScenarioParams(String),

    #[error("history enumeration budget exceeded: |Omega| = {size} > {budget}")]
    BudgetExceeded { size: usize, budget: usize },

    #[error("history space too large to index")]
    SpaceOverflow,

    #[error("event refers to a different history space")]
    EventSpaceMismatch,

    #[error("history has wrong length or out-of-range labels")]
    MalformedHistory,

    #[error("state is not in the commutation subspace (residual {residual:.3e} > tol {tol:.3e})")]
    StateOutsideCommutant { residual: f64, tol: f64 },

    #[error(
        "state is not in the range of cell `{label}` at time {time} (residual {residual:.3e})"
    )]
    StateOutsideCell {
        time: String,
        label: String,
        residual: f64,
    },

    #[error("path mass {mass:.12} deviates from 1 beyond tolerance")]
    MassDeficit { mass: f64 },

    #[error("meet form and ordered product form disagree: {meet:.12} vs {product:.12}")]
    BornMismatch { meet: f64, product: f64 },

    #[error("conditional formula mismatch: {ratio:.12} vs {projected:.12}")]
    ConditionalMismatch { ratio: f64, projected: f64 },

    #[error("conditioning on a null event (probability {0:.3e})")]
    NullConditioning(f64),

    #[error("collapse chain times must be strictly increasing")]
    ChainOrder,

    #[error("observable table has {got} entries, history space has {want}")]
    ObservableTableSize { got: usize, want: usize },

    #[error("observable spectrum strays from the supplied values (deviation {0:.3e})")]
    ObservableSpectrum(f64),

    #[error("times {0} and {1} are not in increasing order")]
    TimeOrder(String, String),

    #[error("sampling from a degenerate measure (total mass {0:.3e})")]
    DegenerateMeasure(f64),

    #[error("no trajectories supplied")]
    EmptyTrajectories,

    #[error("configuration map is missing label `{0}`")]
    MissingConfigLabel(String),

    #[error("subset search supports at most {max} times, analyser has {got}")]
    SubsetSearchTooLarge { max: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
