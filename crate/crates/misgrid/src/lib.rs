//! File formats, experiment drivers and the command-line harness around
//! `misgrid-core`.

pub mod cli;
pub mod edgelist;
pub mod error;
pub mod experiments;
pub mod matpower;
pub mod scenario;

pub use error::{AppError, IngestError};
