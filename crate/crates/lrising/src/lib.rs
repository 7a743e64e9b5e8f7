//! Configuration, file formats, figures and the command-line driver built
//! on `lrising-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod render;
pub mod svg;
pub mod tasks;

pub use config::{Resolved, RunConfig};
pub use error::{ConfigError, TaskError};
pub use manifest::ResultManifest;
