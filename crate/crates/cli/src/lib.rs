//! Command-line front end: model files in, tables, plotting scripts and run
//! reports out.
//!
//! Every subcommand loads a JSON model file (see [`schema`]), runs one
//! analysis and writes `<command>.report.json` next to its tables. The
//! report lists each check with its value and bound; the process exits with
//! status 0 exactly when every check passed.

pub mod args;
pub mod commands;
pub mod report;
pub mod schema;

pub use args::{Cli, Command, Common};
pub use commands::{run, CliError, Session};
pub use report::{inputs_digest, Property, RunReport, Verdict};
pub use schema::{load_model, parse_spec, SchemaError, SCHEMA_VERSION};
