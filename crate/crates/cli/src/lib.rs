//! Configuration, orchestration and artifact writers for `ellopt`.

pub mod config;
pub mod error;
pub mod generate;
pub mod improve;
pub mod output;
pub mod run;
pub mod selftest;

pub use config::RunConfig;
pub use error::CliError;
pub use improve::{improve_control, ImproveOptions, ImproveReport};
pub use run::{run, Manifest, RunOutcome, Stage};
