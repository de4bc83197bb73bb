//! Experiment runner: parses configuration files and drives the pipelines
//! of `inflap-core`.

pub mod commands;
pub mod config;
