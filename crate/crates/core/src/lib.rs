//! Analytical and Monte-Carlo toolkit for asynchronous non-orthogonal
//! multiple access in diffusion-based molecular communication networks.

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod gains;
pub mod ma_schemes;
pub mod mcs;
pub mod optimizer;
pub mod protocol;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
