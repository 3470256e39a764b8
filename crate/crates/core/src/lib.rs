pub mod baseline;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod numerics;
pub mod objective;
pub mod selftest;
pub mod signal;
pub mod surface;
pub mod waoa;

pub use error::{Error, Result};
