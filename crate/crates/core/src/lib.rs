//! Numerical core for experiments on the law of the iterated logarithm for
//! smooth functions in the upper half-space.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel drivers live in the `lil-lab` crate.
#![no_std]
// `!(x > 0.0)` rejects NaN on purpose
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]
extern crate alloc;

pub mod cascade;
pub mod disc;
pub mod error;
pub mod field;
pub mod fit;
pub mod gauges;
pub mod martingale;
pub mod quadrature;
pub mod rng;
pub mod threshold;

pub use error::{Error, Result};
pub use gauges::{GaugeDiagnostics, GaugeFunction, GaugeKind};
