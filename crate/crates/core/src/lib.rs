//! Log-domain exponentiated-gradient memories over time and over variates,
//! with exact and chunk-parallel evaluation, and the tools to check them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chunked;
pub mod chunked_grid;
pub mod equiv;
pub mod error;
pub mod forecast;
pub mod golden;
pub mod grid;
pub mod kernel;
pub mod memory;
pub mod metrics;
pub mod oracle;
pub mod parallel;
pub mod projection;
pub mod series;

pub use error::{Error, Result};
