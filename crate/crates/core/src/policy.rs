//! Q-update arithmetic and the selection rules an agent can follow.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{step_unchecked, Action, GridSpec, PairId, QTable};

/// Linear learning-rate and inverse-temperature schedules over a horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedules {
    pub alpha0: f64,
    pub alpha_final: f64,
    pub beta0: f64,
    pub beta_final: f64,
    pub horizon: usize,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules {
            alpha0: 0.035,
            alpha_final: 0.0,
            beta0: 1.0,
            beta_final: 5.0,
            horizon: 20_000,
        }
    }
}

impl Schedules {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("schedules.alpha0", self.alpha0),
            ("schedules.alpha_final", self.alpha_final),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("{v} is outside [0, 1]")));
            }
        }
        for (key, v) in [
            ("schedules.beta0", self.beta0),
            ("schedules.beta_final", self.beta_final),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("{v} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// `(alpha_t, beta_t)` on the linear ramps; `t` may equal the horizon.
pub fn schedule_at(sched: &Schedules, t: usize) -> Result<(f64, f64)> {
    if t > sched.horizon {
        return Err(Error::contract(format!(
            "time step {t} is beyond the horizon {}",
            sched.horizon
        )));
    }
    let frac = if sched.horizon == 0 {
        0.0
    } else {
        t as f64 / sched.horizon as f64
    };
    Ok((
        sched.alpha0 + (sched.alpha_final - sched.alpha0) * frac,
        sched.beta0 + (sched.beta_final - sched.beta0) * frac,
    ))
}

/// One temporal-difference update. Returns the new value and the absolute
/// size of the change.
pub fn q_update(q_old: f64, reward: f64, max_next_q: f64, alpha: f64, gamma: f64) -> (f64, f64) {
    let target = reward + gamma * max_next_q;
    let q_new = q_old + alpha * (target - q_old);
    (q_new, (q_new - q_old).abs())
}

/// Boltzmann distribution `exp(beta * mu_i) / sum_j exp(beta * mu_j)`.
pub fn softmax_probs(mean_dq: &[f64], beta: f64) -> Result<Vec<f64>> {
    if let Some(i) = mean_dq.iter().position(|m| !m.is_finite()) {
        return Err(Error::contract(format!("mean of pair {i} is not finite")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::contract(format!("beta {beta} must be finite and non-negative")));
    }
    if mean_dq.is_empty() {
        return Ok(Vec::new());
    }
    let max = mean_dq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = mean_dq.iter().map(|m| (beta * (m - max)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Alg.-1 style action choice: uniform with probability `epsilon`, greedy
/// otherwise with ties split uniformly.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &QTable, state: usize, epsilon: f64, rng: &mut R) -> Action {
    if rng.gen::<f64>() < epsilon {
        return Action::ALL[rng.gen_range(0..Action::COUNT)];
    }
    let vals = q.actions(state);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..Action::COUNT).filter(|&i| vals[i] == max).collect();
    let pick = if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    };
    Action::ALL[pick]
}

/// Per-agent bandit statistics: running mean and count of observed update
/// magnitudes for each pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentBanditState {
    mean_dq: Vec<f64>,
    count: Vec<u64>,
}

impl AgentBanditState {
    pub fn new(n_pairs: usize) -> Self {
        AgentBanditState {
            mean_dq: vec![0.0; n_pairs],
            count: vec![0; n_pairs],
        }
    }

    /// Start from given means (counts stay at zero). Mostly useful to pin an
    /// agent to a known selection distribution.
    pub fn with_means(mean_dq: Vec<f64>) -> Self {
        let count = vec![0; mean_dq.len()];
        AgentBanditState { mean_dq, count }
    }

    pub fn n_pairs(&self) -> usize {
        self.mean_dq.len()
    }

    pub fn mean_dq(&self) -> &[f64] {
        &self.mean_dq
    }

    pub fn counts(&self) -> &[u64] {
        &self.count
    }

    pub fn record_dq(&mut self, pair: PairId, delta_q: f64) -> Result<()> {
        if delta_q.is_nan() || delta_q < 0.0 {
            return Err(Error::contract(format!("update magnitude {delta_q} is negative")));
        }
        let i = pair.index();
        if i >= self.mean_dq.len() {
            return Err(Error::contract(format!("pair {i} is out of range")));
        }
        self.count[i] += 1;
        let mu = &mut self.mean_dq[i];
        *mu += (delta_q - *mu) / self.count[i] as f64;
        Ok(())
    }
}

/// Classic on-trajectory Q-learning with epsilon-greedy exploration and a
/// constant learning rate. Kept as a reference point for the discontinuous
/// variants driven by [`crate::multiagent`].
pub fn run_q_learning<R: Rng + ?Sized>(
    spec: &GridSpec,
    gamma: f64,
    alpha: f64,
    epsilon: f64,
    steps: usize,
    rng: &mut R,
) -> Result<QTable> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::contract(format!("epsilon {epsilon} is not a probability")));
    }
    let mut q = QTable::zeros(spec.n_pairs());
    let mut s = spec.state_at(rng.gen_range(0..spec.n_states()));
    for _ in 0..steps {
        let si = spec.state_index(s);
        let a = epsilon_greedy(&q, si, epsilon, rng);
        let (r, next) = step_unchecked(spec, s, a, rng);
        let id = spec.pair_id(s, a);
        let (q_new, _) = q_update(q.get(id), r, q.max_action_value(spec.state_index(next)), alpha, gamma);
        q.set(id, q_new);
        s = next;
    }
    Ok(q)
}
