//! The stochastic grid world.
//!
//! States are cells addressed by `(row, col)` with row 0 at the top. Each
//! state offers the four moves in [`Action::ALL`] order. Special cells
//! teleport the agent to a destination with some probability and pay a
//! reward when they do; otherwise the agent stays put and earns nothing.
//! From a special cell the chosen action has no effect on the dynamics.
//!
//! [`step`] consumes exactly one uniform draw from the random source when the
//! state is special and none otherwise, so trajectories replay bit-for-bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub row: usize,
    pub col: usize,
}

impl State {
    pub const fn new(row: usize, col: usize) -> Self {
        State { row, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    /// Canonical iteration order.
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

/// Dense index of a (state, action) pair: `flat_state * 4 + action`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairId(pub usize);

impl PairId {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn state_index(self) -> usize {
        self.0 / Action::COUNT
    }

    pub fn action(self) -> Action {
        Action::ALL[self.0 % Action::COUNT]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialCell {
    pub source: State,
    pub destination: State,
    pub reward: f64,
    pub success_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub specials: Vec<SpecialCell>,
    pub wall_penalty: f64,
    pub step_reward: f64,
}

/// Cell A at (0,1) jumps to (4,1) paying +10; cell B at (0,3) jumps to (2,3)
/// paying +5. Both succeed half of the time.
impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            height: 5,
            width: 5,
            specials: vec![
                SpecialCell {
                    source: State::new(0, 1),
                    destination: State::new(4, 1),
                    reward: 10.0,
                    success_prob: 0.5,
                },
                SpecialCell {
                    source: State::new(0, 3),
                    destination: State::new(2, 3),
                    reward: 5.0,
                    success_prob: 0.5,
                },
            ],
            wall_penalty: -1.0,
            step_reward: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub prob: f64,
    pub reward: f64,
    pub next: State,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid must be non-empty, got {}x{}",
                self.height, self.width
            )));
        }
        for (i, sp) in self.specials.iter().enumerate() {
            for (what, s) in [("source", sp.source), ("destination", sp.destination)] {
                if !self.contains(s) {
                    return Err(Error::InvalidGrid(format!(
                        "special cell {i}: {what} ({}, {}) is out of bounds",
                        s.row, s.col
                    )));
                }
            }
            if !(0.0..=1.0).contains(&sp.success_prob) {
                return Err(Error::InvalidGrid(format!(
                    "special cell {i}: success_prob {} is not a probability",
                    sp.success_prob
                )));
            }
            if !sp.reward.is_finite() {
                return Err(Error::InvalidGrid(format!("special cell {i}: reward is not finite")));
            }
            if self.specials[..i].iter().any(|o| o.source == sp.source) {
                return Err(Error::InvalidGrid(format!(
                    "special cell {i}: source ({}, {}) is listed twice",
                    sp.source.row, sp.source.col
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.height * self.width
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states() * Action::COUNT
    }

    pub fn contains(&self, s: State) -> bool {
        s.row < self.height && s.col < self.width
    }

    pub fn check(&self, s: State) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::StateOutOfBounds {
                row: s.row,
                col: s.col,
                height: self.height,
                width: self.width,
            })
        }
    }

    pub fn state_index(&self, s: State) -> usize {
        s.row * self.width + s.col
    }

    pub fn state_at(&self, index: usize) -> State {
        State::new(index / self.width, index % self.width)
    }

    pub fn pair_id(&self, s: State, a: Action) -> PairId {
        PairId(self.state_index(s) * Action::COUNT + a.index())
    }

    pub fn pair(&self, id: PairId) -> (State, Action) {
        (self.state_at(id.state_index()), id.action())
    }

    pub fn special_at(&self, s: State) -> Option<&SpecialCell> {
        self.specials.iter().find(|sp| sp.source == s)
    }

    /// Neighbour in direction `a`, or `None` when the move leaves the grid.
    pub fn neighbor(&self, s: State, a: Action) -> Option<State> {
        let (dr, dc) = a.offset();
        let row = s.row.checked_add_signed(dr)?;
        let col = s.col.checked_add_signed(dc)?;
        let next = State::new(row, col);
        self.contains(next).then_some(next)
    }
}

/// All pairs in canonical order: by flat state index, then by action.
pub fn enumerate_pairs(spec: &GridSpec) -> Vec<(State, Action)> {
    (0..spec.n_states())
        .flat_map(|i| {
            let s = spec.state_at(i);
            Action::ALL.into_iter().map(move |a| (s, a))
        })
        .collect()
}

/// Sample one environment transition.
pub fn step<R: Rng + ?Sized>(spec: &GridSpec, s: State, a: Action, rng: &mut R) -> Result<(f64, State)> {
    spec.check(s)?;
    Ok(step_unchecked(spec, s, a, rng))
}

pub(crate) fn step_unchecked<R: Rng + ?Sized>(spec: &GridSpec, s: State, a: Action, rng: &mut R) -> (f64, State) {
    if let Some(sp) = spec.special_at(s) {
        let u: f64 = rng.gen();
        if u < sp.success_prob {
            (sp.reward, sp.destination)
        } else {
            (0.0, s)
        }
    } else {
        match spec.neighbor(s, a) {
            Some(next) => (spec.step_reward, next),
            None => (spec.wall_penalty, s),
        }
    }
}

/// Exact outcome distribution of [`step`]. Zero-probability branches are
/// omitted, so every listed transition has `prob > 0`.
pub fn transition_model(spec: &GridSpec, s: State, a: Action) -> Result<Vec<Transition>> {
    spec.check(s)?;
    let out = if let Some(sp) = spec.special_at(s) {
        let p = sp.success_prob;
        let mut v = Vec::with_capacity(2);
        if p > 0.0 {
            v.push(Transition {
                prob: p,
                reward: sp.reward,
                next: sp.destination,
            });
        }
        if p < 1.0 {
            v.push(Transition {
                prob: 1.0 - p,
                reward: 0.0,
                next: s,
            });
        }
        v
    } else {
        let (reward, next) = match spec.neighbor(s, a) {
            Some(n) => (spec.step_reward, n),
            None => (spec.wall_penalty, s),
        };
        vec![Transition {
            prob: 1.0,
            reward,
            next,
        }]
    };
    Ok(out)
}

/// Dense table over all (state, action) pairs of a grid, indexed by [`PairId`].
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_pairs: usize) -> Self {
        QTable {
            values: vec![0.0; n_pairs],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        QTable { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: PairId) -> f64 {
        self.values[id.0]
    }

    pub fn set(&mut self, id: PairId, v: f64) {
        self.values[id.0] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The four action values of the state with flat index `state`.
    pub fn actions(&self, state: usize) -> &[f64] {
        &self.values[state * Action::COUNT..(state + 1) * Action::COUNT]
    }

    pub fn max_action_value(&self, state: usize) -> f64 {
        self.actions(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
