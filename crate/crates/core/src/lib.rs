//! Precision limits for estimating generalized moments of subdiffraction
//! incoherent objects.
//!
//! The crate computes a quantum (Helstrom-type) lower bound through a tilted
//! one-parameter submodel, simulates spatial-mode demultiplexing (SPADE)
//! estimators that reach it, evaluates Cramér–Rao bounds for direct imaging,
//! and fits the log-log exponents of all three against the object size `Δ`.

pub mod direct;
pub mod error;
pub mod hankel;
pub mod measure;
pub mod precision;
pub mod quadrature;
pub mod rng;
pub mod scaling;
pub mod spade;
pub mod submodel;

pub use error::{Error, Result};
pub use measure::{Atom, DensityShape, Measure, MeasureKind, StandardizedMeasure};
pub use precision::{MpMatrix, DEFAULT_PRECISION_BITS};
