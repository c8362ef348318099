#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod cli;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod quadrature;
pub mod verify;
pub mod weakform;

pub use error::{Error, Result};
pub use geometry::Velocity;
