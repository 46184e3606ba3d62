//! File formats and commands behind the `hopmp` binary.

pub mod commands;
pub mod formats;
