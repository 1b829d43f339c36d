//! Configuration, pipelines and artifact writers behind the `cac` binary.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::RunConfig;
