//! Command line, file formats and the Monte Carlo experiment harness built on
//! [`hawkes_core`].
//!
//! - [`io`]: event series, intensity profiles and JSON parameter files.
//! - [`config`]: flat `key = value` configuration with includes.
//! - [`experiments`]: the bias studies, each producing CSV tables.
//! - [`manifest`]: per-run records used to replay a run exactly.
//! - [`cli`]: the `hawkes` executable.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod manifest;
