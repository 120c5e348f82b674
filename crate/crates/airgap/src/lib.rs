//! Host-side tooling around `airgap-core`: configuration files, checkpoints,
//! trajectory and latency files, remote inference, run directories and the
//! pipelines behind the `airgap` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod hilnet;
pub mod mitigate;
pub mod profile;
pub mod report;
pub mod run;
pub mod trace;
pub mod trajectory;

pub use error::CliError;
