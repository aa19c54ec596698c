//! Channel generation, Monte-Carlo PE estimation, parameter sweeps,
//! runtime benchmarks and CSV output.

mod bench;
mod layout;
mod output;
mod pe;
mod sweep;

pub use bench::{benchmark_runtime, BenchReport, BenchSpec, BenchSummary};
pub use layout::{generate_channels, LayoutConfig};
pub use output::{format_g9, row_fields, write_csv, CSV_HEADER};
pub use pe::{PeEstimator, PE_RELATIVE_SLACK};
pub use sweep::{
    run_sweep, run_trial, solve_method, summarize, trial_channels, Method, MethodOutcome, ResultRow, RowStatus,
    Scenario, SummaryRow, SweepSpec, SweptParameter,
};
