//! Numerical toolkit for sequential (time-dependent) transfer operators of
//! expanding and intermittent interval maps.
//!
//! Layout, bottom-up:
//!
//! * [`map_zoo`] — maps, sequential systems, the contraction parameter `s`;
//! * [`transfer_op`] — grid functions and discretised transfer operators;
//! * [`rpf`] — sequential eigen-triplets and equivariant Gibbs measures;
//! * [`cones`] — Hölder cones, Hilbert metric and cone-contraction checks;
//! * [`spectral_stats`] — pressure, covariance, norm decay, stability;
//! * [`montecarlo`] — orbit simulation and the limit-law test suite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cones;
pub mod error;
pub mod fit;
pub mod map_zoo;
pub mod montecarlo;
pub mod rpf;
pub mod spectral_stats;
pub mod transfer_op;

pub use error::{Error, Result};
