//! File formats, fixtures and command implementations behind the `ddf`
//! binary.
//!
//! - [`format`]: pdf JSON documents and grid CSV dumps
//! - [`scenario`]: scenario JSON files
//! - [`report`]: search-run report directories
//! - [`commands`], [`checks`]: subcommand bodies
//! - [`cli`]: argument parsing

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod commands;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
