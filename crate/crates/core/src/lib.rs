//! Fault detection and isolation by learning in the space of reservoir readout models.
//!
//! A multivariate stream is cut into rolling windows. Every window is summarised by the affine
//! readout of a fixed cycle-reservoir-with-jumps, so each window becomes a point in a function
//! space of readouts. Distances between readouts (closed form, sampled, or under a Gaussian
//! mixture) feed an exponential kernel, and an incremental library of one-class SVMs over that
//! kernel flags departures from normal behaviour and grows one class per discovered fault.
//!
//! Module map:
//!
//! * [`signals`] benchmark generators (NARMA, Van der Pol, three-tank) and scenario composition
//! * [`reservoir`] CRJ reservoir, state driving, ridge readouts, rolling-window model points
//! * [`modelspace`] readout distances, kernel Gram matrices, Gaussian mixtures, classical MDS
//! * [`ocsvm`] ν one-class SVM on a precomputed kernel, scoring, blocked cross-validation
//! * [`librarian`] the incremental fault library
//! * [`eval`] detection and isolation metrics and the signal-space baseline
//! * [`pipeline`] run configuration, staged artifacts and the manifest

// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod librarian;
pub mod modelspace;
pub mod ocsvm;
pub mod pipeline;
pub mod reservoir;
mod serde_matrix;
pub mod signals;

pub use error::{Error, ErrorKind, Result};
