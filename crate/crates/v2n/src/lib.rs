//! Traffic-flow forecasting and V2N service dimensioning: dataset ETL,
//! feature construction, the experiment harness, scaling policies, and the
//! CLI. The pure math (smoothing, neural stack, queueing) lives in
//! `v2n-core`.

pub mod cli;
pub mod config;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod scaling;

pub use v2n_core as core;
