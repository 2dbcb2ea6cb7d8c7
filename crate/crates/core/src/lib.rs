//! Discontinuous bandit Q-learning on a stochastic grid world.
//!
//! Each step, every agent picks any (state, action) pair of the grid (not just
//! the pairs at its current position), samples one transition for it and
//! applies a Q-learning update to a table shared by all agents. Under the
//! bandit policy an agent picks pairs with a softmax over the mean size of the
//! updates it has made to each pair. Selections may be independent, in which
//! case agents that collide on a pair waste their work, or jointly
//! conflict-free.
//!
//! Module map:
//! - [`grid`]: environment, pair indexing, shared table type
//! - [`planner`]: value iteration for the optimal table
//! - [`policy`]: update arithmetic, softmax, epsilon-greedy, schedules
//! - [`multiagent`]: joint selection, conflict resolution, trial runner
//! - [`metrics`]: loss, area under the curve, valid rate, histograms
//! - [`harness`]: batches of trials, CSV/SVG artifacts, manifests

pub mod config;
pub mod error;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod multiagent;
pub mod planner;
pub mod policy;
pub mod rng;
pub mod sampling;

pub use config::{load_config, save_config, ExperimentConfig};
pub use error::{Error, Result};
pub use grid::{
    enumerate_pairs, step, transition_model, Action, GridSpec, PairId, QTable, SpecialCell, State, Transition,
};
pub use harness::{emit_table1, run_batch, run_sweep, run_trials, table1_ratio, BatchOutput, RunManifest, RunSummary};
pub use metrics::{aggregate_trials, area_under, choice_histogram, loss, valid_rate, ChoiceHistogram, MetricsSeries};
pub use multiagent::{
    exact_two_agent_exclusion, multi_agent_step, resolve_conflicts, run_trial, select_conflict, select_conflict_free,
    BanditSignal, ConflictMode, GlobalQTable, JointSelection, Mode, SelectionPolicy, SelectionRound, TrialRecord,
};
pub use planner::{bellman_residual, greedy_policy, value_iteration, OptimalQ};
pub use policy::{epsilon_greedy, q_update, schedule_at, softmax_probs, AgentBanditState, Schedules};
