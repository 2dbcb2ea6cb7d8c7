use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::artifacts::{
    config_digest, curve_csv, histogram_csv, optimal_q_csv, trials_csv, write_file, FileEntry, RunManifest, RunSummary,
    SCHEMA_LOSS, SCHEMA_VALID_RATE,
};
use super::svg::{bar_chart, line_chart, Series, PALETTE};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{aggregate_trials, MetricsSeries};
use crate::multiagent::{run_trial, TrialRecord};
use crate::planner::{value_iteration, OptimalQ, DEFAULT_TOL};
use crate::rng::trial_seed;

/// Aggregated outcome of a batch, before anything touches the disk.
#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub config: ExperimentConfig,
    pub optimal: OptimalQ,
    pub trial_seeds: Vec<u64>,
    pub metrics: MetricsSeries,
    pub workers: usize,
    pub wall_clock_seconds: f64,
}

impl BatchOutput {
    pub fn summary(&self) -> RunSummary {
        RunSummary::new(&self.config, &self.metrics)
    }
}

/// Run every trial of `config` on `workers` threads and aggregate.
///
/// Trials are collected in index order, so the result does not depend on the
/// worker count.
pub fn run_trials(config: &ExperimentConfig, workers: usize) -> Result<BatchOutput> {
    config.validate()?;
    let started = Instant::now();
    let optimal = value_iteration(&config.grid, config.gamma, DEFAULT_TOL)?;
    let seeds: Vec<u64> = (0..config.trials as u64)
        .map(|i| trial_seed(config.master_seed, i))
        .collect();
    let workers = workers.max(1);

    let records: Vec<TrialRecord> = if workers == 1 {
        seeds
            .iter()
            .map(|&s| run_trial(config, &optimal, s))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::contract(format!("thread pool: {e}")))?;
        pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| run_trial(config, &optimal, s))
                .collect::<Result<_>>()
        })?
    };

    let metrics = aggregate_trials(&records, &config.grid)?;
    Ok(BatchOutput {
        config: config.clone(),
        optimal,
        trial_seeds: seeds,
        metrics,
        workers,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Write CSVs, summary, plots and manifest for a finished batch into `dir`.
pub fn write_run_artifacts(out: &BatchOutput, dir: &Path) -> Result<RunManifest> {
    let cfg = &out.config;
    let m = &out.metrics;
    let context = format!(
        "mode={}; n_agents={}; trials={}",
        cfg.mode.slug(),
        cfg.n_agents,
        m.trials
    );
    let mut files: Vec<FileEntry> = Vec::new();
    let mut put = |name: &str, body: &[u8]| -> Result<()> {
        files.push(write_file(&dir.join(name), body)?);
        Ok(())
    };

    put("config.json", (cfg.to_json() + "\n").as_bytes())?;
    put(
        "loss.csv",
        curve_csv(SCHEMA_LOSS, "t,mean_loss,stderr", &context, &m.loss, &m.loss_stderr).as_bytes(),
    )?;
    put(
        "valid_rate.csv",
        curve_csv(
            SCHEMA_VALID_RATE,
            "t,mean_rate,stderr",
            &context,
            &m.valid_rate,
            &m.valid_rate_stderr,
        )
        .as_bytes(),
    )?;
    put(
        "histogram.csv",
        histogram_csv(&m.final_histogram, &cfg.grid, &format!("{context}; scope=first_trial")).as_bytes(),
    )?;
    put(
        "histogram_pooled.csv",
        histogram_csv(
            &m.final_histogram_pooled,
            &cfg.grid,
            &format!("{context}; scope=all_trials"),
        )
        .as_bytes(),
    )?;
    put("trials.csv", trials_csv(m, &out.trial_seeds).as_bytes())?;
    put(
        "optimal_q.csv",
        optimal_q_csv(&cfg.grid, &out.optimal.values).as_bytes(),
    )?;
    let summary = serde_json::to_string_pretty(&out.summary()).expect("summary serialises") + "\n";
    put("summary.json", summary.as_bytes())?;
    for (name, body) in emit_plots(out) {
        put(&name, body.as_bytes())?;
    }

    let mut manifest = RunManifest::new(cfg, out.trial_seeds.clone(), out.workers);
    manifest.wall_clock_seconds = out.wall_clock_seconds;
    manifest.files = files;
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    write_file(&dir.join("manifest.json"), body.as_bytes())?;
    Ok(manifest)
}

/// Run a batch and write its artifacts under `config.output_dir`.
pub fn run_batch(config: &ExperimentConfig, workers: usize) -> Result<(BatchOutput, RunManifest)> {
    let out = run_trials(config, workers)?;
    let manifest = write_run_artifacts(&out, &config.output_dir)?;
    Ok((out, manifest))
}

/// SVG charts for a single run as `(file name, document)` pairs.
pub fn emit_plots(out: &BatchOutput) -> Vec<(String, String)> {
    let cfg = &out.config;
    let m = &out.metrics;
    let digest = config_digest(cfg);
    let title = format!("{}, N = {}", cfg.mode.label(), cfg.n_agents);
    let curve = |ys: &[f64]| Series::from_curve(cfg.mode.label(), PALETTE[0], ys);

    let loss = line_chart(&format!("Loss, {title}"), "t", "L", &[curve(&m.loss)], &digest);
    let valid = line_chart(
        &format!("Valid rate, {title}"),
        "t",
        "R_valid",
        &[curve(&m.valid_rate)],
        &digest,
    );

    // Final choices per cell, row-major.
    let spec = &cfg.grid;
    let labels: Vec<String> = (0..spec.n_states())
        .map(|i| {
            let s = spec.state_at(i);
            format!("({},{})", s.row, s.col)
        })
        .collect();
    let counts: Vec<f64> = m.final_histogram_pooled.per_cell.iter().map(|&c| c as f64).collect();
    let hist = bar_chart(
        &format!("Final choices by cell (all trials), {title}"),
        &labels,
        &counts,
        &digest,
    );

    vec![
        ("loss.svg".into(), loss),
        ("valid_rate.svg".into(), valid),
        ("histogram.svg".into(), hist),
    ]
}
