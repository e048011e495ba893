//! Decentralized Bayesian data fusion.
//!
//! * [`pdf`]: Gaussians, Gaussian mixtures, grid pdfs and discrete
//!   distributions.
//! * [`fusion`]: exact (common-information) and WEP fusion on grids, WEP
//!   weight optimization and channel-filter state.
//! * [`mixture`]: Gaussian-mixture fusion by per-component importance
//!   sampling and moment matching.
//! * [`hybrid`]: factorized fusion of hybrid region/position beliefs.
//! * [`sim`]: a deterministic multi-robot search simulator exercising the
//!   above.
//!
//! The crate is `no_std` (with `alloc`). The `parallel` feature enables
//! rayon-backed moment matching; results are identical either way.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod fusion;
pub mod hybrid;
pub mod mixture;
pub mod math;
pub mod pdf;
pub mod sensor;
pub mod sim;

pub use error::{Error, Result};
