//! Pipeline runner, command-line front end, synthetic dataset generator and
//! HTTP service built on `eegpipe-core`.

pub mod cli;
pub mod config;
pub mod fixture;
pub mod pipeline;
pub mod service;
