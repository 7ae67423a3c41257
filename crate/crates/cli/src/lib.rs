//! Scenario runner for `jetmech`: parse a TOML scenario, build the system from the law
//! catalog, simulate, evaluate diagnostics and emit a summary plus CSV artifacts.
//!
//! The grammar is documented in the repository README; [`scenario::parse_scenario`] is
//! the reference.

pub mod catalog;
pub mod report;
pub mod run;
pub mod scenario;

pub use report::{write_refine, write_run, RefineReport, RunReport, Table};
pub use run::{refine, run, RunError, RunOutput};
pub use scenario::{parse_scenario, Diagnostic, Kind, Scenario, ValidationError, ValidationErrors};
