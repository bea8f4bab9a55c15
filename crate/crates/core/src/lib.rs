//! Near-field multi-target localization with symmetric coprime arrays.
//!
//! The pipeline builds a decoupled covariance from the element-wise product
//! of the initial covariance and its anti-diagonal mirror, which cancels the
//! range-dependent phase and leaves an angle-only self-spectrum plus pairwise
//! cross terms. The difference coarray and spatial smoothing turn that into a
//! full-rank virtual covariance for an angle MUSIC search (phase 1); a range
//! MUSIC search on the initial covariance then keeps the candidate angles that
//! show a significant near-field peak (phase 2).
//!
//! Modules:
//! - [`geometry`]: coprime, dense and subarray layouts, difference coarray
//! - [`channel`]: steering vectors and snapshot synthesis
//! - [`covariance`]: initial, decoupled and smoothed virtual covariances
//! - [`music`]: eigendecomposition, spectra, peak search, two-phase localizer
//! - [`baselines`]: dense-array, far-field coarray and subarray localizers
//! - [`bench`]: association, RMSE and the Monte Carlo harness
//! - [`scenario`]: JSON scenario files

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod channel;
pub mod covariance;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod music;
pub mod scenario;

pub use error::{Error, Result};
pub use exec::Execution;
