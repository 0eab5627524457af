//! Experiment plumbing: configuration, the synthetic problem generator and
//! the command-line interface.

pub mod cli;
pub mod config;
pub mod generate;

pub use cli::cli_main;
pub use config::{ExperimentConfig, ProblemConfig, RunConfig, ScheduleConfig, Smoothing};
pub use generate::{generate_problem, GeneratedProblem, ProblemData};
