//! Benchmark harness for the `lodsplat` renderer: scene generation, tree
//! building, calibration, path rendering and filter/shrink A/B runs.

pub mod cli;
pub mod fixtures;
pub mod path;
pub mod report;

pub use cli::run;
