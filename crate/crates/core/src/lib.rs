//! Deep residual random-feature networks built one layer at a time.
//!
//! Each round samples a frozen tanh layer on `[Φ; x]` and fits the map that
//! adds it to the representation: in closed form for squared loss, or along
//! the functional gradient with a line search for cross-entropy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boosting;
pub mod data;
pub mod error;
pub mod features;
pub mod grid;
pub mod linalg;
pub mod losses;
pub mod optim;
pub mod oracle;
pub mod persist;
pub mod pointcloud;
pub mod rng;
pub mod sandwich;

pub use error::{Error, Result};
