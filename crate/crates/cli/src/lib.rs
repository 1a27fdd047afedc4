//! Command-line harness: file formats, metrics, procedural scenes and the
//! `ctgi` subcommands.

pub mod commands;
pub mod config;
pub mod demo;
pub mod io;
pub mod metrics;
pub mod scenes;
