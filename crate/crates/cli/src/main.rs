use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use dbql_core::harness::{self, workers_from_env};
use dbql_core::planner::{value_iteration, DEFAULT_TOL};
use dbql_core::{load_config, ExperimentConfig, Mode};

/// Discontinuous bandit Q-learning experiments on the stochastic grid world.
///
/// Worker threads default to the available parallelism and can be set with
/// the DBQL_WORKERS environment variable. Exit status is 0 on success, 1 for
/// configuration or usage errors and 2 for runtime failures.
#[derive(Parser, Debug)]
#[command(name = "dbql", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the optimal action values and print them as CSV.
    Plan {
        /// Take the grid and discount from this config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the discount factor.
        #[arg(long)]
        gamma: Option<f64>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all trials of one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run a grid of agent counts and modes, then Table 1 and comparison plots.
    Sweep {
        /// Base configuration; its agent count and mode are replaced.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Agent counts: `start..end:step`, `a,b,c` or a single number.
        #[arg(long, default_value = "10..100:10")]
        agents: String,
        /// `all` or a comma list of uniform_allowed, bandit_allowed,
        /// uniform_free, bandit_free.
        #[arg(long, default_value = "all")]
        modes: String,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Rebuild table1.csv from the runs in a sweep directory.
    Table1 {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Redraw the comparison charts of a sweep directory.
    Plots {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn parse_modes(text: &str) -> anyhow::Result<Vec<Mode>> {
    if text == "all" {
        return Ok(Mode::ALL.to_vec());
    }
    text.split(',')
        .map(|s| Mode::from_slug(s.trim()).with_context(|| format!("unknown mode `{s}`")))
        .collect()
}

fn apply_overrides(cfg: &mut ExperimentConfig, seed: Option<u64>, trials: Option<usize>) -> dbql_core::Result<()> {
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = trials {
        cfg.trials = trials;
    }
    cfg.validate()
}

/// Loads a config file; an unreadable file counts as a configuration error.
fn read_config(path: &Path) -> dbql_core::Result<ExperimentConfig> {
    load_config(path).map_err(|e| match e {
        dbql_core::Error::Io { .. } => dbql_core::Error::Config {
            key: "<file>".into(),
            message: format!("{:#}", anyhow::Error::from(e)),
        },
        other => other,
    })
}

fn base_config(path: Option<&Path>) -> dbql_core::Result<ExperimentConfig> {
    match path {
        Some(p) => read_config(p),
        None => Ok(ExperimentConfig::new(1, Mode::ALL[0])),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = workers_from_env();
    match cli.command {
        Command::Plan { config, gamma, out } => {
            let mut cfg = base_config(config.as_deref())?;
            if let Some(g) = gamma {
                cfg.gamma = g;
                cfg.validate()?;
            }
            let opt = value_iteration(&cfg.grid, cfg.gamma, DEFAULT_TOL)?;
            let csv = harness::optimal_q_csv(&cfg.grid, &opt.values);
            match out {
                Some(path) => {
                    harness::write_file(&path, csv.as_bytes())?;
                    eprintln!(
                        "wrote {} ({} sweeps, residual {:.3e})",
                        path.display(),
                        opt.sweeps,
                        opt.residual
                    );
                }
                None => print!("{csv}"),
            }
        }
        Command::Run {
            config,
            seed,
            out,
            trials,
        } => {
            let mut cfg = read_config(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            apply_overrides(&mut cfg, seed, trials)?;
            let (batch, manifest) = harness::run_batch(&cfg, workers)?;
            let s = batch.summary();
            println!(
                "{} N={} trials={}: S_under={:.3} R_valid(whole)={:.4} R_valid(trailing)={:.4} final loss={:.4}",
                cfg.mode.label(),
                cfg.n_agents,
                s.trials,
                s.s_under,
                s.valid_rate_overall,
                s.valid_rate_trailing,
                s.final_loss
            );
            println!(
                "wrote {} files to {} in {:.1}s",
                manifest.files.len() + 1,
                cfg.output_dir.display(),
                manifest.wall_clock_seconds
            );
        }
        Command::Sweep {
            config,
            agents,
            modes,
            out,
            seed,
            trials,
        } => {
            let agents = harness::parse_agent_range(&agents)?;
            let modes = parse_modes(&modes).map_err(|e| dbql_core::Error::Config {
                key: "modes".into(),
                message: e.to_string(),
            })?;
            let mut base = base_config(config.as_deref())?;
            apply_overrides(&mut base, seed, trials)?;
            for &n in &agents {
                let mut probe = base.clone();
                probe.n_agents = n;
                probe.validate()?;
            }
            let result = harness::run_sweep(&base, &agents, &modes, &out, workers)?;
            for r in &result.runs {
                println!(
                    "{:<30} N={:>3}: S_under={:.3} R_valid(trailing)={:.4}",
                    r.config.mode.label(),
                    r.config.n_agents,
                    r.s_under,
                    r.valid_rate_trailing
                );
            }
            print_table1(&result.table1);
        }
        Command::Table1 { dir } => {
            let summaries = harness::load_summaries(&dir)?;
            if summaries.is_empty() {
                bail!("no summary.json found under {}", dir.display());
            }
            let rows = harness::emit_table1(&summaries, Some(&dir.join("table1.csv")))?;
            print_table1(&rows);
        }
        Command::Plots { dir } => {
            for f in harness::plot_sweep(&dir)? {
                println!("{}", dir.join(&f.path).display());
            }
        }
    }
    Ok(())
}

fn print_table1(rows: &[harness::Table1Row]) {
    for r in rows {
        println!("table1 {:<7} N={:>3}: {:.3}", r.policy.name(), r.n_agents, r.ratio);
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<dbql_core::Error>() {
        Some(dbql_core::Error::Config { .. }) | Some(dbql_core::Error::Infeasible { .. }) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
