use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PairId, QTable};
use crate::metrics::{ChoiceHistogram, MetricsSeries};

pub const SCHEMA_LOSS: &str = "dbql-loss v1";
pub const SCHEMA_VALID_RATE: &str = "dbql-valid-rate v1";
pub const SCHEMA_HISTOGRAM: &str = "dbql-histogram v1";
pub const SCHEMA_TRIALS: &str = "dbql-trials v1";
pub const SCHEMA_TABLE1: &str = "dbql-table1 v1";
pub const SCHEMA_OPTIMAL_Q: &str = "dbql-optimal-q v1";
const SCHEMA_SUMMARY: &str = "dbql-summary v1";
const SCHEMA_MANIFEST: &str = "dbql-manifest v1";

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short digest identifying a configuration on charts.
pub(crate) fn config_digest(cfg: &ExperimentConfig) -> String {
    let mut echo = cfg.clone();
    echo.output_dir = Default::default();
    sha256_hex(echo.to_json().as_bytes())[..12].to_string()
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<FileEntry> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(FileEntry {
        path: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(contents),
        bytes: contents.len() as u64,
    })
}

fn header(schema: &str, extra: &str, columns: &str) -> String {
    if extra.is_empty() {
        format!("# {schema}\n{columns}\n")
    } else {
        format!("# {schema}; {extra}\n{columns}\n")
    }
}

pub(crate) fn curve_csv(schema: &str, columns: &str, context: &str, mean: &[f64], stderr: &[f64]) -> String {
    let mut out = header(schema, context, columns);
    for (t, (m, se)) in mean.iter().zip(stderr).enumerate() {
        let _ = writeln!(out, "{},{},{}", t + 1, m, se);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Parse a `loss.csv` / `valid_rate.csv` body.
pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize| Error::contract(format!("{}: malformed line {line}", path.display()));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|(i, l)| {
            let mut f = l.split(',');
            let mut next = || f.next().ok_or_else(|| bad(i + 1));
            let t = next()?.parse().map_err(|_| bad(i + 1))?;
            let mean = next()?.parse().map_err(|_| bad(i + 1))?;
            let stderr = next()?.parse().map_err(|_| bad(i + 1))?;
            Ok(CurvePoint { t, mean, stderr })
        })
        .collect()
}

pub(crate) fn histogram_csv(hist: &ChoiceHistogram, spec: &GridSpec, context: &str) -> String {
    let mut out = header(SCHEMA_HISTOGRAM, context, "row,col,action,count");
    for (i, &count) in hist.per_pair.iter().enumerate() {
        let (s, a) = spec.pair(PairId(i));
        let _ = writeln!(out, "{},{},{},{}", s.row, s.col, a.name(), count);
    }
    out
}

pub(crate) fn trials_csv(metrics: &MetricsSeries, seeds: &[u64]) -> String {
    let mut out = header(
        SCHEMA_TRIALS,
        "",
        "trial,seed,s_under,valid_rate_overall,valid_rate_trailing",
    );
    for (i, seed) in seeds.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i,
            seed,
            metrics.s_under_per_trial[i],
            metrics.valid_rate_overall_per_trial[i],
            metrics.valid_rate_trailing_per_trial[i]
        );
    }
    out
}

/// Optimal action values as `row, col, action, q_value`.
pub fn optimal_q_csv(spec: &GridSpec, q: &QTable) -> String {
    let mut out = header(SCHEMA_OPTIMAL_Q, "", "row,col,action,q_value");
    for (i, v) in q.as_slice().iter().enumerate() {
        let (s, a) = spec.pair(PairId(i));
        let _ = writeln!(out, "{},{},{},{}", s.row, s.col, a.name(), v);
    }
    out
}

/// Headline numbers of one run, enough to rebuild Table-1 style comparisons
/// without re-reading the curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub config: ExperimentConfig,
    pub trials: usize,
    pub horizon: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Area under the trial-averaged loss curve.
    pub s_under: f64,
    pub s_under_trial_mean: f64,
    pub s_under_trial_stderr: f64,
    pub valid_rate_overall: f64,
    pub valid_rate_overall_stderr: f64,
    pub valid_rate_trailing: f64,
    pub valid_rate_trailing_stderr: f64,
}

impl RunSummary {
    pub fn new(config: &ExperimentConfig, metrics: &MetricsSeries) -> Self {
        let (s_mean, s_se) = metrics.s_under_stats();
        let (vo, vo_se) = metrics.valid_rate_overall();
        let (vt, vt_se) = metrics.valid_rate_trailing();
        RunSummary {
            schema: SCHEMA_SUMMARY.to_string(),
            config: config.clone(),
            trials: metrics.trials,
            horizon: metrics.horizon(),
            initial_loss: metrics.initial_loss,
            final_loss: metrics.loss.last().copied().unwrap_or(metrics.initial_loss),
            s_under: metrics.s_under,
            s_under_trial_mean: s_mean,
            s_under_trial_stderr: s_se,
            valid_rate_overall: vo,
            valid_rate_overall_stderr: vo_se,
            valid_rate_trailing: vt,
            valid_rate_trailing_stderr: vt_se,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub software_version: String,
    pub config: ExperimentConfig,
    pub trial_seeds: Vec<u64>,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    /// Conventions needed to interpret the outputs.
    pub conventions: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub(crate) fn new(config: &ExperimentConfig, trial_seeds: Vec<u64>, workers: usize) -> Self {
        RunManifest {
            schema: SCHEMA_MANIFEST.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            trial_seeds,
            workers,
            wall_clock_seconds: 0.0,
            conventions: vec![
                "loss at t is measured after step t; S_under sums t = 1..T".into(),
                "S_under and Table-1 ratios use the trial-averaged loss curve".into(),
                format!(
                    "trailing valid rate averages the last {}% of steps",
                    crate::metrics::TRAILING_FRACTION * 100.0
                ),
                "losing proposers in a conflict record nothing".into(),
                "updates within a step read the table as of the step start".into(),
            ],
            files: Vec::new(),
        }
    }
}
