//! Command-line front end for `medseq-core`: schema-driven CSV loading, the
//! run configuration document, command dispatch and result emission.

pub mod cli;
pub mod config;
pub mod emit;
pub mod error;
pub mod load;
pub mod run;

pub use config::{resolve, Command, Format, Overrides, Resolved, RunConfig};
pub use emit::{canonical_json, ResultDocument};
pub use error::{CliError, CliResult};
pub use load::{load_panel, write_panel, Schema};
pub use run::{load_data, run, RunOutput};
