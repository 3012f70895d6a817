//! Numerical laboratory for multiscale code sequences on finite metric
//! spaces and the bounds they induce on suprema of sub-Gaussian processes.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`metric`]: finite metric spaces, probability measures, balls,
//!   diameters, covering numbers;
//! - [`partition`]: increasing partition sequences with geometric diameter
//!   decay, plus a deterministic ball-carving builder;
//! - [`vlc`]: variable-length code sequences over a partition tree
//!   (Kraft accounting, Shannon lengths, admissibility validation);
//! - [`functionals`]: the ball-measure integral and the code-length series
//!   bounding it;
//! - [`gaussian`]: covariance models, seeded sampling, Monte Carlo
//!   supremum estimation, and empirical tail checks;
//! - [`lower`]: greedy supremum-driven partitions and the selection-order
//!   code assignment used for lower-bound diagnostics;
//! - [`optimizer`]: heuristic extremization of the functionals over the
//!   probability simplex.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature for embedded use. File formats, reports, and the command
//! line tool live in the companion `chainlab` crate.

#![cfg_attr(not(feature = "std"), no_std)]

// vec! and format! are used pervasively, also under no_std.
#[macro_use]
extern crate alloc;

pub mod error;
pub mod functionals;
pub mod gaussian;
pub mod lower;
pub mod metric;
pub mod optimizer;
pub mod partition;
pub mod vlc;

pub use error::{Error, Result};
pub use functionals::{BoundReport, TailSum, WeightSequence};
pub use gaussian::{GaussianModel, McEstimate};
pub use metric::{MetricSpace, ProbabilityMeasure};
pub use partition::PartitionTree;
pub use vlc::VlcSequence;
