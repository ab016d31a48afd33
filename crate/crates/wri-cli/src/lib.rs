//! Experiment harnesses and output writers around `wri-core`.
//!
//! The library side exists so integration tests can drive the same code as
//! the `wri` binary:
//!
//! - [`config`]: the TOML experiment description and its defaults,
//! - [`experiments`]: model/acquisition builders and run drivers,
//! - [`outputs`]: deterministic file and image writers,
//! - [`validate`]: fast self-checks of the solver building blocks.

pub mod config;
pub mod experiments;
pub mod outputs;
pub mod validate;
