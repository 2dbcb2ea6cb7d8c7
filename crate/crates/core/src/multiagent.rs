//! N agents learning one shared Q-table.
//!
//! Every step each agent proposes a (state, action) pair. Proposals are drawn
//! either independently (conflicts allowed) or jointly so that no two agents
//! pick the same pair (conflict-free). When several agents propose the same
//! pair only one of them, chosen uniformly, gets its update applied; the rest
//! of that step's work is discarded and the losers record nothing.
//!
//! Updates within a step read the table as it was at the start of the step
//! and are written back together, so the result does not depend on the order
//! in which winners are processed.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{step_unchecked, GridSpec, PairId, QTable};
use crate::metrics::loss;
use crate::planner::OptimalQ;
use crate::policy::{q_update, schedule_at, AgentBanditState};
use crate::rng::{self, Purpose, TrialRng};
use crate::sampling::sample_softmax_among;

/// The shared table every agent reads from and writes to.
pub type GlobalQTable = QTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionPolicy {
    #[serde(rename = "uniform", alias = "uniform_random")]
    UniformRandom,
    #[serde(rename = "bandit")]
    Bandit,
}

impl SelectionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionPolicy::UniformRandom => "uniform",
            SelectionPolicy::Bandit => "bandit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictMode {
    Allowed,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub policy: SelectionPolicy,
    pub conflict: ConflictMode,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::new(SelectionPolicy::UniformRandom, ConflictMode::Allowed),
        Mode::new(SelectionPolicy::Bandit, ConflictMode::Allowed),
        Mode::new(SelectionPolicy::UniformRandom, ConflictMode::Free),
        Mode::new(SelectionPolicy::Bandit, ConflictMode::Free),
    ];

    pub const fn new(policy: SelectionPolicy, conflict: ConflictMode) -> Self {
        Mode { policy, conflict }
    }

    /// Legend label, e.g. `bandit/conflict-free`.
    pub fn label(&self) -> &'static str {
        match (self.policy, self.conflict) {
            (SelectionPolicy::UniformRandom, ConflictMode::Allowed) => "uniform random/conflict",
            (SelectionPolicy::Bandit, ConflictMode::Allowed) => "bandit/conflict",
            (SelectionPolicy::UniformRandom, ConflictMode::Free) => "uniform random/conflict-free",
            (SelectionPolicy::Bandit, ConflictMode::Free) => "bandit/conflict-free",
        }
    }

    /// File-system friendly name, e.g. `bandit_free`.
    pub fn slug(&self) -> &'static str {
        match (self.policy, self.conflict) {
            (SelectionPolicy::UniformRandom, ConflictMode::Allowed) => "uniform_allowed",
            (SelectionPolicy::Bandit, ConflictMode::Allowed) => "bandit_allowed",
            (SelectionPolicy::UniformRandom, ConflictMode::Free) => "uniform_free",
            (SelectionPolicy::Bandit, ConflictMode::Free) => "bandit_free",
        }
    }

    pub fn from_slug(slug: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.slug() == slug)
    }
}

/// What a winning agent feeds into its bandit statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BanditSignal {
    /// Magnitude of the applied change, `|q_new - q_old|`.
    #[default]
    #[serde(rename = "update")]
    UpdateMagnitude,
    /// Magnitude of the temporal-difference error before the learning rate
    /// is applied, `|r + gamma * max Q(s', .) - q_old|`.
    #[serde(rename = "td_error")]
    TdError,
}

/// Proposals of one step plus the order in which agents drew them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointSelection {
    /// `proposals[agent]` is the pair that agent proposes.
    pub proposals: Vec<PairId>,
    /// Agents in the order they sampled. Identity for independent draws.
    pub draw_order: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionRound {
    pub proposals: Vec<PairId>,
    /// `(pair, winning agent)` sorted by pair.
    pub winners: Vec<(PairId, usize)>,
    pub valid_count: usize,
}

fn check_rngs<R>(agents: &[AgentBanditState], rngs: &[R]) -> Result<usize> {
    if agents.is_empty() {
        return Err(Error::contract("at least one agent is required"));
    }
    if rngs.len() != agents.len() {
        return Err(Error::contract(format!(
            "{} agents but {} selection streams",
            agents.len(),
            rngs.len()
        )));
    }
    let k = agents[0].n_pairs();
    if agents.iter().any(|a| a.n_pairs() != k) {
        return Err(Error::contract("agents disagree on the number of pairs"));
    }
    Ok(k)
}

/// Independent proposals; duplicates are possible. Agent `i` draws from
/// `rngs[i]`.
pub fn select_conflict<R: Rng>(
    agents: &[AgentBanditState],
    policy: SelectionPolicy,
    beta: f64,
    rngs: &mut [R],
) -> Result<JointSelection> {
    let k = check_rngs(agents, rngs)?;
    let all: Vec<usize> = (0..k).collect();
    let proposals = agents
        .iter()
        .zip(rngs.iter_mut())
        .map(|(agent, rng)| {
            PairId(match policy {
                SelectionPolicy::UniformRandom => rng.gen_range(0..k),
                SelectionPolicy::Bandit => sample_softmax_among(agent.mean_dq(), beta, &all, rng),
            })
        })
        .collect();
    Ok(JointSelection {
        proposals,
        draw_order: (0..agents.len()).collect(),
    })
}

/// Pairwise-distinct proposals. A uniformly random agent order is drawn from
/// `order_rng`; each agent in turn samples from its own distribution
/// restricted to the pairs nobody has taken yet.
pub fn select_conflict_free<R: Rng, O: Rng + ?Sized>(
    agents: &[AgentBanditState],
    policy: SelectionPolicy,
    beta: f64,
    rngs: &mut [R],
    order_rng: &mut O,
) -> Result<JointSelection> {
    let k = check_rngs(agents, rngs)?;
    let n = agents.len();
    if n > k {
        return Err(Error::Infeasible { agents: n, pairs: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(order_rng);

    let mut remaining: Vec<usize> = (0..k).collect();
    let mut proposals = vec![PairId(0); n];
    for &agent in &order {
        let rng = &mut rngs[agent];
        let j = match policy {
            SelectionPolicy::UniformRandom => rng.gen_range(0..remaining.len()),
            SelectionPolicy::Bandit => sample_softmax_among(agents[agent].mean_dq(), beta, &remaining, rng),
        };
        proposals[agent] = PairId(remaining.swap_remove(j));
    }
    Ok(JointSelection {
        proposals,
        draw_order: order,
    })
}

/// Joint law of two independent choosers conditioned on picking different
/// options: `P(i, j) ∝ p1[i] * p2[j]` for `i != j`. Returned as a dense
/// `K x K` matrix with a zero diagonal.
pub fn exact_two_agent_exclusion(p1: &[f64], p2: &[f64]) -> Result<Vec<Vec<f64>>> {
    let k = p1.len();
    if k < 2 || p2.len() != k {
        return Err(Error::contract(format!(
            "need two distributions over the same K >= 2 options, got {} and {}",
            p1.len(),
            p2.len()
        )));
    }
    for p in [p1, p2] {
        let total: f64 = p.iter().sum();
        if p.iter().any(|&x| x.is_nan() || x < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::contract("input is not a probability vector"));
        }
    }
    let mut joint: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.0 } else { p1[i] * p2[j] }).collect())
        .collect();
    let z: f64 = joint.iter().flatten().sum();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::NoValidOutcome);
    }
    joint.iter_mut().flatten().for_each(|x| *x /= z);
    Ok(joint)
}

/// Pick one surviving proposer per distinct pair, uniformly among that pair's
/// proposers. Draws happen only for contested pairs, in pair order.
pub fn resolve_conflicts<R: Rng + ?Sized>(proposals: &[PairId], rng: &mut R) -> Result<SelectionRound> {
    if proposals.is_empty() {
        return Err(Error::contract("no proposals to resolve"));
    }
    let mut by_pair: Vec<(PairId, usize)> = proposals.iter().copied().zip(0..).collect();
    by_pair.sort_unstable();

    let mut winners = Vec::with_capacity(by_pair.len());
    let mut start = 0;
    while start < by_pair.len() {
        let pair = by_pair[start].0;
        let end = start + by_pair[start..].iter().take_while(|(p, _)| *p == pair).count();
        let pick = if end - start == 1 {
            start
        } else {
            start + rng.gen_range(0..end - start)
        };
        winners.push((pair, by_pair[pick].1));
        start = end;
    }
    Ok(SelectionRound {
        proposals: proposals.to_vec(),
        valid_count: winners.len(),
        winners,
    })
}

/// Random streams of one trial, split by purpose.
#[derive(Clone, Debug)]
pub struct TrialStreams {
    pub selection: Vec<TrialRng>,
    pub permutation: TrialRng,
    pub environment: TrialRng,
    pub conflict: TrialRng,
}

impl TrialStreams {
    pub fn new(trial_seed: u64, n_agents: usize) -> Self {
        TrialStreams {
            selection: (0..n_agents)
                .map(|i| rng::stream(trial_seed, Purpose::Selection, i as u32))
                .collect(),
            permutation: rng::stream(trial_seed, Purpose::Permutation, 0),
            environment: rng::stream(trial_seed, Purpose::Environment, 0),
            conflict: rng::stream(trial_seed, Purpose::ConflictResolution, 0),
        }
    }
}

/// A computed but not yet applied update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendingUpdate {
    pub pair: PairId,
    pub agent: usize,
    pub q_new: f64,
    pub delta_q: f64,
    /// Value recorded in the winner's bandit statistics.
    pub signal: f64,
}

/// Environment outcomes and new values for every winner, all read from `q`
/// as given. Environment draws are consumed in pair order.
pub fn plan_updates<R: Rng + ?Sized>(
    q: &GlobalQTable,
    spec: &GridSpec,
    winners: &[(PairId, usize)],
    alpha: f64,
    gamma: f64,
    signal: BanditSignal,
    env_rng: &mut R,
) -> Vec<PendingUpdate> {
    winners
        .iter()
        .map(|&(pair, agent)| {
            let (s, a) = spec.pair(pair);
            let (reward, next) = step_unchecked(spec, s, a, env_rng);
            let max_next = q.max_action_value(spec.state_index(next));
            let q_old = q.get(pair);
            let (q_new, delta_q) = q_update(q_old, reward, max_next, alpha, gamma);
            let signal = match signal {
                BanditSignal::UpdateMagnitude => delta_q,
                BanditSignal::TdError => (reward + gamma * max_next - q_old).abs(),
            };
            PendingUpdate {
                pair,
                agent,
                q_new,
                delta_q,
                signal,
            }
        })
        .collect()
}

pub fn commit_updates(q: &mut GlobalQTable, agents: &mut [AgentBanditState], updates: &[PendingUpdate]) -> Result<()> {
    for u in updates {
        q.set(u.pair, u.q_new);
        agents[u.agent].record_dq(u.pair, u.signal)?;
    }
    Ok(())
}

/// Static inputs shared by every step of a trial.
#[derive(Clone, Copy, Debug)]
pub struct StepContext<'a> {
    pub spec: &'a GridSpec,
    pub mode: Mode,
    pub schedules: &'a crate::policy::Schedules,
    pub gamma: f64,
    pub signal: BanditSignal,
}

/// Advance the shared table by one synchronous step at time `t`.
pub fn multi_agent_step(
    q: &mut GlobalQTable,
    agents: &mut [AgentBanditState],
    ctx: &StepContext<'_>,
    t: usize,
    streams: &mut TrialStreams,
) -> Result<SelectionRound> {
    if t >= ctx.schedules.horizon {
        return Err(Error::contract(format!(
            "step {t} is not before the horizon {}",
            ctx.schedules.horizon
        )));
    }
    let (alpha, beta) = schedule_at(ctx.schedules, t)?;
    let selection = match ctx.mode.conflict {
        ConflictMode::Allowed => select_conflict(agents, ctx.mode.policy, beta, &mut streams.selection)?,
        ConflictMode::Free => select_conflict_free(
            agents,
            ctx.mode.policy,
            beta,
            &mut streams.selection,
            &mut streams.permutation,
        )?,
    };
    let round = resolve_conflicts(&selection.proposals, &mut streams.conflict)?;
    if ctx.mode.conflict == ConflictMode::Free {
        assert_eq!(
            round.valid_count,
            agents.len(),
            "conflict-free selection produced duplicate pairs"
        );
    }
    let updates = plan_updates(
        q,
        ctx.spec,
        &round.winners,
        alpha,
        ctx.gamma,
        ctx.signal,
        &mut streams.environment,
    );
    commit_updates(q, agents, &updates)?;
    Ok(round)
}

/// Everything the metrics need from one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub n_agents: usize,
    /// Loss before the first step.
    pub initial_loss: f64,
    /// `loss[t - 1]` is the loss after step `t`.
    pub loss: Vec<f64>,
    pub valid_count: Vec<u32>,
    /// Proposals of the last step (empty when the horizon is zero).
    pub final_proposals: Vec<PairId>,
    pub final_q: QTable,
}

/// Run one trial of `config.schedules.horizon` steps from an all-zero table.
pub fn run_trial(config: &ExperimentConfig, q_opt: &OptimalQ, trial_seed: u64) -> Result<TrialRecord> {
    config.validate()?;
    let spec = &config.grid;
    let k = spec.n_pairs();
    let n = config.n_agents;
    let horizon = config.schedules.horizon;

    let mut q = GlobalQTable::zeros(k);
    let mut agents = vec![AgentBanditState::new(k); n];
    let mut streams = TrialStreams::new(trial_seed, n);
    let ctx = StepContext {
        spec,
        mode: config.mode,
        schedules: &config.schedules,
        gamma: config.gamma,
        signal: config.bandit_signal,
    };

    let initial_loss = loss(&q, &q_opt.values)?;
    let mut losses = Vec::with_capacity(horizon);
    let mut valid = Vec::with_capacity(horizon);
    let mut final_proposals = Vec::new();
    for t in 0..horizon {
        let round = multi_agent_step(&mut q, &mut agents, &ctx, t, &mut streams)?;
        losses.push(loss(&q, &q_opt.values)?);
        valid.push(round.valid_count as u32);
        if t + 1 == horizon {
            final_proposals = round.proposals;
        }
    }
    Ok(TrialRecord {
        seed: trial_seed,
        n_agents: n,
        initial_loss,
        loss: losses,
        valid_count: valid,
        final_proposals,
        final_q: q,
    })
}
