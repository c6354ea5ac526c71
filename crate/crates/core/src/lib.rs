//! Quadratic-approximation line searches for mini-batch training.

pub mod approx;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod net;
pub mod objective;
pub mod probe;
pub mod search;
pub mod study;
pub mod train;

pub use error::{Error, Result};
