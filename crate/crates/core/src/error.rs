//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors produced by constructors and operations.
///
/// Validation of metric axioms, tree structure, and code admissibility is
/// *not* reported through this type; those checks return lists of diagnostics
/// so that a broken input can be inspected as a whole.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input dimensions or index structure do not line up.
    Shape(String),
    /// A point label is not present in the space.
    UnknownLabel(String),
    /// A parameter is outside its admissible range.
    Parameter(String),
    /// The space has zero diameter where a positive one is required.
    DegenerateSpace,
    /// A measure assigns zero mass where positive mass is required
    /// (infinite code length / divergent integrand).
    ZeroMass(String),
    /// A series has no summable tail for the given level weights.
    DivergentSeries(String),
    /// A covariance matrix is not positive semidefinite within tolerance.
    NotPositiveSemiDefinite(String),
    /// Cholesky factorization failed even after jitter escalation.
    Factorization(String),
    /// An operation over a subset of points received an empty subset.
    EmptySubset,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "structural error: {msg}"),
            Error::UnknownLabel(label) => write!(f, "unknown point label: {label:?}"),
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::DegenerateSpace => write!(f, "degenerate space: diameter is zero"),
            Error::ZeroMass(msg) => write!(f, "zero mass: {msg}"),
            Error::DivergentSeries(msg) => write!(f, "divergent series: {msg}"),
            Error::NotPositiveSemiDefinite(msg) => {
                write!(f, "covariance is not positive semidefinite: {msg}")
            }
            Error::Factorization(msg) => write!(f, "factorization failed: {msg}"),
            Error::EmptySubset => write!(f, "subset of points is empty"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
