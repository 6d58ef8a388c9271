//! Desk-scale certification of unbounded operators on the line.

// `!(a < b)` rejects NaN on purpose; index loops walk parallel arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approxid;
pub mod deficiency;
pub mod error;
pub mod expr;
pub mod finmod;
pub mod funcspace;
pub mod kasparov;
pub mod linalg;
pub mod multiplier;
pub mod ode;
pub mod operators;
pub mod scenario;
pub mod spectrum;

pub use error::{Error, Result};
