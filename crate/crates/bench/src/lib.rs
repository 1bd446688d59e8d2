//! Monte-Carlo benchmarks comparing SAMP with classical order detectors.

pub mod crb;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod presets;
pub mod report;
pub mod scenario;
pub mod timing;

pub use engine::{run_monte_carlo, ExperimentConfig, Method, MethodSeries, MetricSeries};
pub use error::{BenchError, Result};
pub use scenario::{Scenario, Sweep, SweepAxis};
