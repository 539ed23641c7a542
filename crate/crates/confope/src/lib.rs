//! File formats, experiment drivers and the command-line front end for
//! `confope-core`.

pub mod battery;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod io;
pub mod registry;
pub mod sim;
pub mod svg;

pub use error::{AppError, AppResult};
