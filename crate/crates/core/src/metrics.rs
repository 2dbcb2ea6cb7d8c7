//! Learning-curve metrics: loss against the optimal table, area under the
//! curve, the valid-selection rate and final-step choice histograms.

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, PairId, QTable};
use crate::multiagent::{SelectionRound, TrialRecord};

/// Share of the run, counted from the end, used for trailing-window means.
pub const TRAILING_FRACTION: f64 = 0.05;

/// Mean absolute error between a learned table and the optimal one.
pub fn loss(q: &QTable, q_opt: &QTable) -> Result<f64> {
    if q.len() != q_opt.len() || q.is_empty() {
        return Err(Error::contract(format!(
            "table shapes differ or are empty: {} vs {}",
            q.len(),
            q_opt.len()
        )));
    }
    let total: f64 = q
        .as_slice()
        .iter()
        .zip(q_opt.as_slice())
        .map(|(a, b)| (b - a).abs())
        .sum();
    Ok(total / q.len() as f64)
}

/// Area under a loss curve: the plain sum of its entries.
pub fn area_under(losses: &[f64]) -> Result<f64> {
    if let Some(t) = losses.iter().position(|&l| l.is_nan() || l < 0.0) {
        return Err(Error::contract(format!("loss at index {t} is negative or NaN")));
    }
    Ok(losses.iter().sum())
}

pub fn valid_rate(round: &SelectionRound, n_agents: usize) -> f64 {
    round.valid_count as f64 / n_agents as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceHistogram {
    /// Count per pair, in pair order.
    pub per_pair: Vec<u64>,
    /// Count per cell, summed over the four actions, by flat state index.
    pub per_cell: Vec<u64>,
}

impl ChoiceHistogram {
    pub fn total(&self) -> u64 {
        self.per_pair.iter().sum()
    }

    pub fn merge(&mut self, other: &ChoiceHistogram) {
        for (a, b) in self.per_pair.iter_mut().zip(&other.per_pair) {
            *a += b;
        }
        for (a, b) in self.per_cell.iter_mut().zip(&other.per_cell) {
            *a += b;
        }
    }
}

pub fn choice_histogram(proposals: &[PairId], spec: &GridSpec) -> ChoiceHistogram {
    let mut per_pair = vec![0u64; spec.n_pairs()];
    for p in proposals {
        per_pair[p.index()] += 1;
    }
    let per_cell = per_pair.chunks(Action::COUNT).map(|c| c.iter().sum()).collect();
    ChoiceHistogram { per_pair, per_cell }
}

/// Trial-averaged learning curves with their standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSeries {
    pub trials: usize,
    pub n_agents: usize,
    pub initial_loss: f64,
    pub loss: Vec<f64>,
    pub loss_stderr: Vec<f64>,
    pub valid_rate: Vec<f64>,
    pub valid_rate_stderr: Vec<f64>,
    /// Area under the averaged loss curve.
    pub s_under: f64,
    pub s_under_per_trial: Vec<f64>,
    /// Mean valid rate over the whole run, per trial.
    pub valid_rate_overall_per_trial: Vec<f64>,
    /// Mean valid rate over the trailing window, per trial.
    pub valid_rate_trailing_per_trial: Vec<f64>,
    /// Final-step proposals of the first trial.
    pub final_histogram: ChoiceHistogram,
    /// Final-step proposals summed over all trials.
    pub final_histogram_pooled: ChoiceHistogram,
}

/// Mean and standard error of the mean (zero for fewer than two samples).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn trailing_window(len: usize) -> usize {
    if len == 0 {
        0
    } else {
        ((len as f64 * TRAILING_FRACTION).ceil() as usize).clamp(1, len)
    }
}

impl MetricsSeries {
    pub fn horizon(&self) -> usize {
        self.loss.len()
    }

    pub fn s_under_stats(&self) -> (f64, f64) {
        mean_stderr(&self.s_under_per_trial)
    }

    pub fn valid_rate_overall(&self) -> (f64, f64) {
        mean_stderr(&self.valid_rate_overall_per_trial)
    }

    pub fn valid_rate_trailing(&self) -> (f64, f64) {
        mean_stderr(&self.valid_rate_trailing_per_trial)
    }
}

/// Pointwise means and standard errors across trials.
pub fn aggregate_trials(records: &[TrialRecord], spec: &GridSpec) -> Result<MetricsSeries> {
    let first = records
        .first()
        .ok_or_else(|| Error::contract("no trials to aggregate"))?;
    let horizon = first.loss.len();
    let n_agents = first.n_agents;
    for (i, r) in records.iter().enumerate() {
        if r.loss.len() != horizon || r.valid_count.len() != horizon {
            return Err(Error::contract(format!(
                "trial {i} has {} steps, expected {horizon}",
                r.loss.len()
            )));
        }
        if r.n_agents != n_agents {
            return Err(Error::contract(format!("trial {i} has a different agent count")));
        }
    }
    let n = n_agents as f64;
    let rate = |r: &TrialRecord, t: usize| r.valid_count[t] as f64 / n;

    let mut loss = Vec::with_capacity(horizon);
    let mut loss_stderr = Vec::with_capacity(horizon);
    let mut valid_rate = Vec::with_capacity(horizon);
    let mut valid_rate_stderr = Vec::with_capacity(horizon);
    let mut column = vec![0.0; records.len()];
    for t in 0..horizon {
        column.iter_mut().zip(records).for_each(|(c, r)| *c = r.loss[t]);
        let (m, se) = mean_stderr(&column);
        loss.push(m);
        loss_stderr.push(se);
        column.iter_mut().zip(records).for_each(|(c, r)| *c = rate(r, t));
        let (m, se) = mean_stderr(&column);
        valid_rate.push(m);
        valid_rate_stderr.push(se);
    }

    let window = trailing_window(horizon);
    let mean_rate = |r: &TrialRecord, from: usize| -> f64 {
        if horizon == 0 {
            0.0
        } else {
            (from..horizon).map(|t| rate(r, t)).sum::<f64>() / (horizon - from) as f64
        }
    };

    let s_under_per_trial = records
        .iter()
        .map(|r| area_under(&r.loss))
        .collect::<Result<Vec<_>>>()?;

    let mut pooled = choice_histogram(&[], spec);
    for r in records {
        pooled.merge(&choice_histogram(&r.final_proposals, spec));
    }

    Ok(MetricsSeries {
        trials: records.len(),
        n_agents,
        initial_loss: first.initial_loss,
        s_under: area_under(&loss)?,
        loss,
        loss_stderr,
        valid_rate,
        valid_rate_stderr,
        s_under_per_trial,
        valid_rate_overall_per_trial: records.iter().map(|r| mean_rate(r, 0)).collect(),
        valid_rate_trailing_per_trial: records.iter().map(|r| mean_rate(r, horizon - window)).collect(),
        final_histogram: choice_histogram(&first.final_proposals, spec),
        final_histogram_pooled: pooled,
    })
}
