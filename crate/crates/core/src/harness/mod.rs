//! Sweep orchestration, CSV output and the acceptance report.

pub mod config;
pub mod experiments;
pub mod record;
pub mod report;
pub mod runner;
pub mod selftest;
pub mod sweep;

pub use config::{RunConfig, SweepAxes};
pub use record::MetricRecord;
pub use runner::{run_point, Point, RunOptions, Simulator};
