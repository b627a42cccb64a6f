//! Information-rate estimation and bounds for finite-state channels.
//!
//! Simulated channel outputs are scored by forward–backward recursions on an
//! auxiliary finite-state model. The resulting upper, lower and difference
//! bounds are tightened by expectation–maximization over the auxiliary
//! parameters, with a derivative-free optimizer as baseline.

pub mod baseline;
pub mod bounds;
pub mod channels;
pub mod em;
pub mod error;
pub mod inference;
pub mod rng;
pub mod special;
pub mod trellis;

pub use error::{Error, Result};
