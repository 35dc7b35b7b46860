//! File formats, parallel simulation studies and the `netspline` command
//! line on top of [`netspline_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod study;

pub use error::{AppError, Result};
pub use netspline_core;
