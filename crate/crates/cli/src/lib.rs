//! `conetool`: command-line experiments on model cones.
//!
//! Every subcommand writes a JSON report with a manifest (config hash,
//! versions, deviation ledger); `solve` writes a trajectory directory of
//! per-time CSV files.

pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod traj;
