pub mod channel;
pub mod config;
pub mod error;
pub mod error_model;
pub mod experiments;
pub mod geometry;
pub mod interference;
pub mod linalg;
pub mod optimizer;
pub mod rng;

pub use error::{Error, Result};
