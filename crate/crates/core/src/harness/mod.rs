//! Monte Carlo benchmarking: dataset generation and ingestion, trial loops
//! over seeded substreams, and CSV reports.

mod bench;
mod config;
mod data;

pub use bench::{
    channel, exact_statistic, normalized, run_benchmark, run_estimate, Benchmark, BenchmarkReport,
    EstimateRequest, ReportRow, DATA_CHANNEL, THREADS_ENV,
};
pub use config::{mechanism_for, Distribution, ExperimentConfig, NoiseMode, ResolvedExperiment, StatisticKind};
pub use data::{generate_dataset, load_csv, parse_csv, spread_for_correlation, write_csv};
