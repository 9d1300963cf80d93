//! Error type shared by every module in the crate.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong when building models, folding tensors, or
/// running the solver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A spectral model violates its invariants (frequency out of `[0, 2pi)`
    /// or duplicate frequencies).
    #[error("invalid spectral model: {0}")]
    InvalidModel(String),

    /// An argument is out of its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands have incompatible shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A matrix or factor set contains a NaN or infinite entry.
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    /// k-rank computation would enumerate too many column subsets.
    #[error("k-rank of a {cols}-column matrix exceeds the combinatorial cap of {cap} columns")]
    ColumnCapExceeded { cols: usize, cap: usize },

    /// The solver was handed a tensor with no observed cells.
    #[error("masked tensor has no observed cells")]
    EmptyMask,

    /// A factor column carries no usable phase information.
    #[error("degenerate column: {0}")]
    DegenerateColumn(&'static str),

    /// An amplitude fit has more unknowns than observations.
    #[error("underdetermined system: {unknowns} unknowns but only {observations} observations")]
    Underdetermined { unknowns: usize, observations: usize },

    /// Model resynthesis was requested for an empty (rank-zero) solution.
    #[error("cannot resynthesize a signal from a rank-zero model")]
    EmptyModel,
}
