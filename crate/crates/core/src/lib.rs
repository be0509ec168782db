//! Constructive parameter paths inside sublevel sets of piecewise-linear
//! networks, and disconnection certificates for networks that are too narrow.
//!
//! * [`net`]: networks, losses, backprop, activation checks.
//! * [`linalg`]: rank, span coefficients, determinant signs.
//! * [`path`]: output-preserving moves, first-layer alignment, tail
//!   connection, the full sublevel-set path and its verifier.
//! * [`cert`]: width-`N` instances, neuron swaps, certificates and barrier scans.
//! * [`experiment`]: the commands behind the `sublevel` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cert;
pub mod config;
pub mod error;
pub mod experiment;
pub mod json;
pub mod linalg;
mod matrix_serde;
pub mod net;
pub mod path;
pub mod train;

pub use error::{Error, Result};
