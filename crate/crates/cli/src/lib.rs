//! Front end for `ssdual`: spec files in, reports and plot-ready tables out.

pub mod emit;
pub mod error;
pub mod run;
pub mod spec;

pub use error::{CliError, Result};
pub use run::{execute, run, Command, Outcome, RunConfig};
pub use spec::{parse_spec, read_spec, SpecFile};
