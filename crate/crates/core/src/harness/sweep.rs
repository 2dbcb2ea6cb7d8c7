use std::collections::BTreeSet;
use std::path::Path;

use super::artifacts::{config_digest, read_curve_csv, write_file, FileEntry, RunSummary};
use super::batch::{run_trials, write_run_artifacts};
use super::svg::{line_chart, Series, PALETTE};
use super::table1::{emit_table1, load_summaries, Table1Row};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::multiagent::Mode;

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub runs: Vec<RunSummary>,
    pub table1: Vec<Table1Row>,
    pub plots: Vec<FileEntry>,
}

/// Directory name of one run inside a sweep, e.g. `bandit_free_n050`.
pub fn run_dir_name(mode: Mode, n_agents: usize) -> String {
    format!("{}_n{:03}", mode.slug(), n_agents)
}

/// Parse `start..end:step` (inclusive end), a comma list, or a single count.
pub fn parse_agent_range(text: &str) -> Result<Vec<usize>> {
    let bad = || {
        Error::config(
            "agents",
            format!("cannot parse `{text}`; expected e.g. 10..100:10 or 10,50,100"),
        )
    };
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let values: Vec<usize> = if let Some((range, step)) = text.split_once(':') {
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step == 0 || a > b {
            return Err(bad());
        }
        (a..=b).step_by(step).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

/// Run every (mode, agent count) combination of `base`, writing each run to
/// its own directory under `out`, then `table1.csv` and comparison plots.
pub fn run_sweep(
    base: &ExperimentConfig,
    agents: &[usize],
    modes: &[Mode],
    out: &Path,
    workers: usize,
) -> Result<SweepOutput> {
    let mut runs = Vec::new();
    for &n in agents {
        for &mode in modes {
            let mut cfg = base.clone();
            cfg.n_agents = n;
            cfg.mode = mode;
            cfg.output_dir = out.join(run_dir_name(mode, n));
            let batch = run_trials(&cfg, workers)?;
            write_run_artifacts(&batch, &cfg.output_dir)?;
            runs.push(batch.summary());
        }
    }
    let table1 = emit_table1(&runs, Some(&out.join("table1.csv")))?;
    let plots = plot_sweep(out)?;
    Ok(SweepOutput { runs, table1, plots })
}

/// Comparison charts for a sweep directory: one four-mode loss chart per
/// agent count and valid rate against agent count.
pub fn plot_sweep(dir: &Path) -> Result<Vec<FileEntry>> {
    let summaries = load_summaries(dir)?;
    if summaries.is_empty() {
        return Err(Error::contract(format!("no runs found under {}", dir.display())));
    }
    let digest = {
        let mut base = summaries[0].config.clone();
        base.n_agents = 0;
        base.mode = Mode::ALL[0];
        config_digest(&base)
    };
    let find = |mode: Mode, n: usize| {
        summaries
            .iter()
            .find(|s| s.config.mode == mode && s.config.n_agents == n)
    };
    let counts: BTreeSet<usize> = summaries.iter().map(|s| s.config.n_agents).collect();
    let mut files = Vec::new();

    for &n in &counts {
        let mut series = Vec::new();
        for (k, mode) in Mode::ALL.iter().enumerate() {
            if find(*mode, n).is_none() {
                continue;
            }
            let curve = read_curve_csv(&dir.join(run_dir_name(*mode, n)).join("loss.csv"))?;
            let ys: Vec<f64> = curve.iter().map(|p| p.mean).collect();
            series.push(Series::from_curve(mode.label(), PALETTE[k], &ys));
        }
        let svg = line_chart(&format!("Loss, N = {n}"), "t", "L", &series, &digest);
        files.push(write_file(&dir.join(format!("loss_n{n:03}.svg")), svg.as_bytes())?);
    }

    for (name, pick, y_label) in [
        (
            "valid_rate_vs_agents.svg",
            (|s: &RunSummary| s.valid_rate_overall) as fn(&RunSummary) -> f64,
            "R_valid (whole run)",
        ),
        (
            "valid_rate_trailing_vs_agents.svg",
            |s: &RunSummary| s.valid_rate_trailing,
            "R_valid (trailing window)",
        ),
    ] {
        let series: Vec<Series> = Mode::ALL
            .iter()
            .enumerate()
            .filter_map(|(k, mode)| {
                let points: Vec<(f64, f64)> = counts
                    .iter()
                    .filter_map(|&n| find(*mode, n).map(|s| (n as f64, pick(s))))
                    .collect();
                (!points.is_empty()).then(|| Series::new(mode.label(), PALETTE[k], points))
            })
            .collect();
        let svg = line_chart("Valid rate by agent count", "N", y_label, &series, &digest);
        files.push(write_file(&dir.join(name), svg.as_bytes())?);
    }
    Ok(files)
}
