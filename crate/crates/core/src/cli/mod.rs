//! Command-line front end: configuration, run artifacts and CSV reports.

pub mod artifact;
pub mod commands;
pub mod config;

pub use artifact::{write_atomic, ArtifactStep, RunArtifact, ARTIFACT_VERSION};
pub use commands::{
    cmd_oracle, cmd_solve, cmd_verify, fmt_f64, run_oracle, run_solve, run_verify, summary_path,
    summary_table, OracleRequest, VerifySummary,
};
pub use config::{Backend, SolveConfig};
