//! Command-line front end for the saga group recommender: dataset
//! ingestion, experiment orchestration and result emission. The binary in
//! `main.rs` is a thin clap wrapper over [`commands`] and
//! [`pipeline::run_experiment`].

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod ingest;
pub mod pipeline;
