//! Exact support recovery for noisy compressed sensing.
//!
//! The crate is organised around the two-step selector: a square-root SLOPE
//! pilot fitted on one half of the sample ([`slope`]), followed by
//! thresholding of debiased per-coordinate statistics computed on the other
//! half ([`selector`]). A median-of-means variant for heavy tails and outliers
//! lives in [`mom`], evaluators for the minimax risk bounds in [`bounds`], and
//! the Monte Carlo harness used for phase-transition experiments in [`sim`].

pub mod bounds;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod mom;
pub mod rng;
pub mod selector;
pub mod sim;
pub mod slope;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Dataset, DatasetView, ProblemInstance, SparseVector, SplitScheme, SupportMask};
