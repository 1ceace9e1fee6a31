//! Configuration loading and task orchestration for the `nehari` binary.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, RunConfig, Task};
pub use run::{execute, Status};
