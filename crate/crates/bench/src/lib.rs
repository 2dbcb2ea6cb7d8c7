//! Fixtures shared by the benchmarks in `benches/`.

use dbql_core::multiagent::TrialStreams;
use dbql_core::{AgentBanditState, GridSpec, Mode, QTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Agents whose running means look like those of a trial in progress.
pub fn warmed_agents(n_agents: usize, n_pairs: usize, seed: u64) -> Vec<AgentBanditState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_agents)
        .map(|_| AgentBanditState::with_means((0..n_pairs).map(|_| rng.gen_range(0.0..0.5)).collect()))
        .collect()
}

/// Mutable state of one trial, as seen by a single step.
pub struct StepFixture {
    pub spec: GridSpec,
    pub mode: Mode,
    pub q: QTable,
    pub agents: Vec<AgentBanditState>,
    pub streams: TrialStreams,
}

impl StepFixture {
    pub fn new(n_agents: usize, mode: Mode) -> Self {
        let spec = GridSpec::default();
        let k = spec.n_pairs();
        StepFixture {
            q: QTable::zeros(k),
            agents: warmed_agents(n_agents, k, 7),
            streams: TrialStreams::new(11, n_agents),
            spec,
            mode,
        }
    }
}
