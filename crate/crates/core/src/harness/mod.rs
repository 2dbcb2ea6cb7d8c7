//! Experiment orchestration and artifacts.
//!
//! A run directory holds:
//!
//! | file | columns |
//! |------|---------|
//! | `loss.csv` | `t, mean_loss, stderr` |
//! | `valid_rate.csv` | `t, mean_rate, stderr` |
//! | `histogram.csv` | `row, col, action, count` (final step, first trial) |
//! | `histogram_pooled.csv` | `row, col, action, count` (final step, all trials) |
//! | `trials.csv` | `trial, seed, s_under, valid_rate_overall, valid_rate_trailing` |
//! | `summary.json`, `config.json`, `manifest.json`, `*.svg` | |
//!
//! Every CSV starts with a `# <schema id> v<version>` line followed by the
//! column header.

mod artifacts;
mod batch;
pub mod svg;
mod sweep;
mod table1;

pub use artifacts::{
    optimal_q_csv, read_curve_csv, write_file, CurvePoint, FileEntry, RunManifest, RunSummary, SCHEMA_HISTOGRAM,
    SCHEMA_LOSS, SCHEMA_OPTIMAL_Q, SCHEMA_TABLE1, SCHEMA_TRIALS, SCHEMA_VALID_RATE,
};
pub use batch::{emit_plots, run_batch, run_trials, write_run_artifacts, BatchOutput};
pub use sweep::{parse_agent_range, plot_sweep, run_dir_name, run_sweep, SweepOutput};
pub use table1::{emit_table1, load_summaries, table1_ratio, Table1Row};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "DBQL_WORKERS";

/// Worker count from [`WORKERS_ENV`], falling back to the available
/// parallelism.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
