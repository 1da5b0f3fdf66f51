//! Library surface of the command-line crate: configuration loading, the
//! shared training/checkpoint pipeline, and the command implementations.
//! The `rdiffbr` binary is a thin argument parser over these modules, and
//! the integration tests drive the same code paths directly.

pub mod commands;
pub mod config;
pub mod pipeline;
