//! File formats, parallel estimation and the `acceval` command-line tool
//! built on [`acceval_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod events;
pub mod json;
pub mod parallel;
pub mod trace;

pub use commands::{cmd_ce, cmd_eval, cmd_fit, cmd_synth, Outcome};
pub use config::RunConfig;
pub use error::AppError;
