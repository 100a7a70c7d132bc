//! Files, training runs and the command-line interface around
//! [`semfield_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod images;
pub mod render;
pub mod run;
pub mod sweep;

pub use error::{Error, Result};
