//! Command-line pipeline around the `ttpce` library: configuration, builtin
//! benchmark oracles, the file-exchange protocol and the `basis`, `fit`,
//! `validate`, `sweep` and `moments` commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod exchange;
pub mod oracles;
pub mod table;

pub use error::{CliError, CliResult};
