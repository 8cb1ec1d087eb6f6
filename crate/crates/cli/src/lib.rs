//! Command-line front end for `certfix`: TOML problem documents in, JSON
//! reports and CSV traces out.

pub mod commands;
pub mod document;
pub mod report;

pub use commands::{
    cmd_certify, cmd_inexact, cmd_solve, cmd_stability, InexactOptions, Outcome, SolveOptions,
    EXIT_BUDGET, EXIT_CERTIFICATION, EXIT_OK, EXIT_PARSE,
};
pub use document::ProblemDocument;
pub use report::ReportDocument;
