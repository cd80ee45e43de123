//! Numerical kernels for Gaussian approximation of high-dimensional
//! martingale difference sequences.
//!
//! The crate is organized around one pipeline: generate a martingale
//! difference path ([`generators`]), measure how far its normalized sum is
//! from the matching Gaussian law over hyper-rectangles ([`kolmogorov`],
//! backed by the quasi-Monte Carlo rectangle probabilities of [`gauss`]),
//! and compare the measurement against explicit Berry-Esseen bound
//! formulas ([`bounds`]).
//!
//! Everything here is deterministic given the seeds passed in, allocates
//! through `alloc` only, and performs no I/O; the companion CLI crate owns
//! configuration files, reports, and parallel replication scheduling.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod bounds;
pub mod gauss;
pub mod generators;
pub mod kolmogorov;
pub mod math;
pub mod quad;
pub mod rect;
pub mod seed;
pub mod spectral;

pub use gauss::ProbEstimate;
pub use rect::Rectangle;
pub use spectral::{Matrix, SpectralStats, SymMatrix};
