//! Subcommand implementations.

pub mod bench;
pub mod enumcheck;
pub mod gen_data;
pub mod run;
