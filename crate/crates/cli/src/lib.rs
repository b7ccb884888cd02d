//! Library surface of the `gda` command-line tool, exposed so the
//! integration and acceptance tests can drive the pipelines directly.

pub mod commands;
pub mod config;
