//! Strongly minimal linearizations of polynomial and rational matrices.

pub mod analyze;
pub mod cli;
pub mod error;
pub mod hankel;
pub mod linearize;
pub mod numkernel;
pub mod polyrat;

pub use error::{Error, Result};
