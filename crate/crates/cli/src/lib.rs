//! Command-line front end of the `featspace` toolkit.

pub mod ablate;
pub mod analyze;
pub mod cli;
pub mod dataset;
pub mod reference;
pub mod report;
pub mod runfile;
pub mod train;

pub use cli::{run, Cli};
