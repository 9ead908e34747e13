#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod fe;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
