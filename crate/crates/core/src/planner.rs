//! Dynamic-programming ground truth for the optimal action-value function.

use crate::error::{Error, Result};
use crate::grid::{enumerate_pairs, transition_model, Action, GridSpec, QTable};

/// Hard cap on sweeps; with `gamma < 1` the residual shrinks geometrically,
/// so this is only reached when `tol` is below floating-point resolution.
const MAX_SWEEPS: usize = 1_000_000;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct OptimalQ {
    pub values: QTable,
    pub gamma: f64,
    /// Max-norm Bellman optimality residual of `values`.
    pub residual: f64,
    pub sweeps: usize,
}

/// The transition model of every pair flattened for repeated backups.
#[derive(Clone, Debug)]
pub struct BellmanModel {
    // (prob, reward, next flat state) per pair, in pair order
    outcomes: Vec<Vec<(f64, f64, usize)>>,
    n_states: usize,
}

impl BellmanModel {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let outcomes = enumerate_pairs(spec)
            .into_iter()
            .map(|(s, a)| {
                transition_model(spec, s, a).map(|ts| {
                    ts.into_iter()
                        .map(|t| (t.prob, t.reward, spec.state_index(t.next)))
                        .collect()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BellmanModel {
            outcomes,
            n_states: spec.n_states(),
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.outcomes.len()
    }

    /// Expected immediate reward of every pair.
    pub fn expected_rewards(&self) -> QTable {
        QTable::from_vec(
            self.outcomes
                .iter()
                .map(|os| os.iter().map(|&(p, r, _)| p * r).sum())
                .collect(),
        )
    }

    /// One synchronous application of the Bellman optimality operator.
    pub fn backup(&self, q: &QTable, gamma: f64) -> QTable {
        let state_max: Vec<f64> = (0..self.n_states).map(|s| q.max_action_value(s)).collect();
        QTable::from_vec(
            self.outcomes
                .iter()
                .map(|os| os.iter().map(|&(p, r, next)| p * (r + gamma * state_max[next])).sum())
                .collect(),
        )
    }

    pub fn residual(&self, q: &QTable, gamma: f64) -> f64 {
        self.backup(q, gamma)
            .as_slice()
            .iter()
            .zip(q.as_slice())
            .map(|(t, v)| (t - v).abs())
            .fold(0.0, f64::max)
    }
}

/// Value iteration from an all-zero table.
pub fn value_iteration(spec: &GridSpec, gamma: f64, tol: f64) -> Result<OptimalQ> {
    value_iteration_from(spec, gamma, tol, QTable::zeros(spec.n_pairs()))
}

/// Value iteration from a caller-supplied starting table. Sweeps are
/// Jacobi-style (double-buffered), and iteration stops on the residual.
pub fn value_iteration_from(spec: &GridSpec, gamma: f64, tol: f64, init: QTable) -> Result<OptimalQ> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Divergence { gamma });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::contract(format!("tolerance must be positive, got {tol}")));
    }
    let model = BellmanModel::new(spec)?;
    if init.len() != model.n_pairs() {
        return Err(Error::contract(format!(
            "initial table has {} entries, grid has {} pairs",
            init.len(),
            model.n_pairs()
        )));
    }

    let mut q = init;
    for sweeps in 0..MAX_SWEEPS {
        let next = model.backup(&q, gamma);
        let residual = next
            .as_slice()
            .iter()
            .zip(q.as_slice())
            .map(|(t, v)| (t - v).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok(OptimalQ {
                values: next,
                gamma,
                residual,
                sweeps,
            });
        }
        q = next;
    }
    Err(Error::contract(format!(
        "value iteration did not reach tolerance {tol} within {MAX_SWEEPS} sweeps"
    )))
}

/// Greedy action per flat state index; ties go to the earliest action in
/// canonical order.
pub fn greedy_policy(q: &QTable) -> Vec<Action> {
    let n_states = q.len() / Action::COUNT;
    (0..n_states)
        .map(|s| {
            let vals = q.actions(s);
            let mut best = 0;
            for i in 1..Action::COUNT {
                if vals[i] > vals[best] {
                    best = i;
                }
            }
            Action::ALL[best]
        })
        .collect()
}

pub fn bellman_residual(spec: &GridSpec, q: &QTable, gamma: f64) -> Result<f64> {
    let model = BellmanModel::new(spec)?;
    if q.len() != model.n_pairs() {
        return Err(Error::contract(format!(
            "table has {} entries, grid has {} pairs",
            q.len(),
            model.n_pairs()
        )));
    }
    Ok(model.residual(q, gamma))
}
