//! Capacity of discrete memoryless multiple-access channels.
//!
//! The capacity of an N-user MAC is the maximum of the mutual information
//! over its largest elementary sub-channels: every oversized input alphabet
//! is cut down to each subset of size `m`, the mutual information is
//! maximized on each resulting face, and the best face wins. Kuhn-Tucker
//! residuals are reported for every face optimum; they are necessary, not
//! sufficient, since elementary channels can have several local maxima.

pub mod error;
pub mod model;
pub mod info;
pub mod elementary;
pub mod optimize;
pub mod verify;
pub mod hull;
pub mod region;
pub mod suites;
pub mod cli;

pub use error::{Error, Result};
