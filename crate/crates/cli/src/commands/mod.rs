//! The five subcommands.

pub mod ablate;
pub mod bench;
pub mod case_study;
pub mod sweep;
pub mod train;
