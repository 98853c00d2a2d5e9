//! Per-block tabular Q-learning agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::TutorState;

pub const SNAPSHOT_FORMAT: &str = "gridlock-agent/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TutorError {
    #[error("block `{0}` has an empty assistance catalog")]
    EmptyCatalog(String),
    #[error("action `{action}` is not in the catalog of block `{block}`")]
    UnknownAction { block: String, action: String },
    #[error("score {0} is outside [0, 1]")]
    OutOfRangeScore(f64),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Explore,
    Exploit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { alpha: 0.1, gamma: 0.9, epsilon: 0.2, epsilon_decay: 0.995, epsilon_floor: 0.01 }
    }
}

/// Reward for one assistance decision, always in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Reward(f64);

impl Reward {
    pub fn clamped(value: f64) -> Reward {
        Reward(value.clamp(-1.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_score(s: f64) -> Result<f64, TutorError> {
    if (0.0..=1.0).contains(&s) {
        Ok(s)
    } else {
        Err(TutorError::OutOfRangeScore(s))
    }
}

/// Score change caused by an assistance decision. A missing earlier score counts as 0.
pub fn reward_from(score_before: Option<f64>, score_after: f64) -> Result<Reward, TutorError> {
    let after = check_score(score_after)?;
    let before = score_before.map(check_score).transpose()?.unwrap_or(0.0);
    Ok(Reward::clamped(after - before))
}

/// Q-learning agent for one content block. Actions are the block's catalog
/// ids in catalog order; the table is dense over the 135 states.
#[derive(Debug, Clone, PartialEq)]
pub struct TutorAgent {
    block_id: String,
    actions: Vec<String>,
    q: Vec<f64>,
    visits: Vec<u64>,
    params: Hyperparams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Cell {
    state: TutorState,
    action: String,
    q: f64,
    visits: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    format: String,
    block_id: String,
    actions: Vec<String>,
    hyperparameters: Hyperparams,
    cells: Vec<Cell>,
}

impl TutorAgent {
    pub fn new(block_id: impl Into<String>, actions: Vec<String>) -> TutorAgent {
        Self::with_params(block_id, actions, Hyperparams::default())
    }

    pub fn with_params(block_id: impl Into<String>, actions: Vec<String>, params: Hyperparams) -> TutorAgent {
        let n = TutorState::COUNT * actions.len();
        TutorAgent { block_id: block_id.into(), actions, q: vec![0.0; n], visits: vec![0; n], params }
    }

    /// Fresh agent over a block's assistance catalog.
    pub fn for_block(block: &crate::ContentBlock, params: Hyperparams) -> TutorAgent {
        Self::with_params(&block.id, block.assistance.iter().map(|a| a.id.clone()).collect(), params)
    }

    pub fn block_id(&self) -> &str {
        &self.block_id
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.params.epsilon = epsilon;
    }

    /// Applies one per-episode decay step, not going below the floor.
    pub fn decay_epsilon(&mut self) {
        self.params.epsilon = (self.params.epsilon * self.params.epsilon_decay).max(self.params.epsilon_floor);
    }

    fn action_index(&self, action: &str) -> Result<usize, TutorError> {
        self.actions.iter().position(|a| a == action).ok_or_else(|| TutorError::UnknownAction {
            block: self.block_id.clone(),
            action: action.to_string(),
        })
    }

    fn cell(&self, state: TutorState, a: usize) -> usize {
        state.index() * self.actions.len() + a
    }

    fn row(&self, state: TutorState) -> &[f64] {
        let n = self.actions.len();
        &self.q[state.index() * n..(state.index() + 1) * n]
    }

    /// Q-value; unknown actions read as 0.
    pub fn q(&self, state: TutorState, action: &str) -> f64 {
        self.action_index(action).map_or(0.0, |a| self.q[self.cell(state, a)])
    }

    pub fn visits(&self, state: TutorState, action: &str) -> u64 {
        self.action_index(action).map_or(0, |a| self.visits[self.cell(state, a)])
    }

    /// Total updates made in `state` over all actions.
    pub fn state_visits(&self, state: TutorState) -> u64 {
        let n = self.actions.len();
        self.visits[state.index() * n..(state.index() + 1) * n].iter().sum()
    }

    fn argmax(&self, state: TutorState) -> usize {
        let mut best = 0;
        for (i, &v) in self.row(state).iter().enumerate() {
            if v > self.row(state)[best] {
                best = i;
            }
        }
        best
    }

    /// Highest-valued action, earliest in catalog order on ties.
    pub fn greedy(&self, state: TutorState) -> Result<&str, TutorError> {
        if self.actions.is_empty() {
            return Err(TutorError::EmptyCatalog(self.block_id.clone()));
        }
        Ok(&self.actions[self.argmax(state)])
    }

    /// Picks an action; explore mode is epsilon-greedy and deterministic in `seed`.
    pub fn choose_action(&self, state: TutorState, mode: Mode, seed: u64) -> Result<&str, TutorError> {
        self.choose_with(state, mode, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Like [`choose_action`](Self::choose_action), drawing from stream
    /// `stream` of the generator seeded with `seed`.
    pub fn choose_in_stream(&self, state: TutorState, mode: Mode, seed: u64, stream: u64) -> Result<&str, TutorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        self.choose_with(state, mode, &mut rng)
    }

    pub fn choose_with<R: Rng + ?Sized>(&self, state: TutorState, mode: Mode, rng: &mut R) -> Result<&str, TutorError> {
        if self.actions.is_empty() {
            return Err(TutorError::EmptyCatalog(self.block_id.clone()));
        }
        if mode == Mode::Explore && rng.random::<f64>() < self.params.epsilon {
            return Ok(&self.actions[rng.random_range(0..self.actions.len())]);
        }
        Ok(&self.actions[self.argmax(state)])
    }

    /// One Q-learning step. `next_state` is `None` when the step ends the chain.
    pub fn update(
        &mut self,
        state: TutorState,
        action: &str,
        reward: Reward,
        next_state: Option<TutorState>,
    ) -> Result<(), TutorError> {
        self.update_value(state, action, reward.value(), next_state)
    }

    /// [`update`](Self::update) with an unclamped reward.
    pub fn update_value(
        &mut self,
        state: TutorState,
        action: &str,
        reward: f64,
        next_state: Option<TutorState>,
    ) -> Result<(), TutorError> {
        let a = self.action_index(action)?;
        let future = match next_state {
            Some(next) => self.row(next).iter().copied().fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        };
        let cell = self.cell(state, a);
        let q = self.q[cell];
        self.q[cell] = q + self.params.alpha * (reward + self.params.gamma * future - q);
        self.visits[cell] += 1;
        Ok(())
    }

    /// Serializes to JSON. Only cells that were visited or hold a value are listed.
    pub fn snapshot(&self) -> String {
        let mut cells = Vec::new();
        for state in TutorState::all() {
            for (a, action) in self.actions.iter().enumerate() {
                let i = self.cell(state, a);
                if self.visits[i] > 0 || self.q[i].to_bits() != 0 {
                    cells.push(Cell { state, action: action.clone(), q: self.q[i], visits: self.visits[i] });
                }
            }
        }
        let doc = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            block_id: self.block_id.clone(),
            actions: self.actions.clone(),
            hyperparameters: self.params,
            cells,
        };
        serde_json::to_string_pretty(&doc).expect("snapshot serializes")
    }

    pub fn restore(document: &str) -> Result<TutorAgent, TutorError> {
        let corrupt = |m: String| TutorError::CorruptSnapshot(m);
        let doc: Snapshot = serde_json::from_str(document).map_err(|e| corrupt(e.to_string()))?;
        if doc.format != SNAPSHOT_FORMAT {
            return Err(corrupt(format!("unsupported format `{}`", doc.format)));
        }
        let p = doc.hyperparameters;
        let finite = [p.alpha, p.gamma, p.epsilon, p.epsilon_decay, p.epsilon_floor].iter().all(|v| v.is_finite());
        if !finite || !(0.0..=1.0).contains(&p.epsilon) {
            return Err(corrupt("hyperparameters out of range".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = doc.actions.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(corrupt(format!("action `{dup}` listed twice")));
        }
        let mut agent = TutorAgent::with_params(doc.block_id, doc.actions, p);
        let mut filled = std::collections::HashSet::new();
        for c in doc.cells {
            let a = agent.action_index(&c.action).map_err(|e| corrupt(e.to_string()))?;
            let i = agent.cell(c.state, a);
            if !filled.insert(i) {
                return Err(corrupt(format!("cell {} / `{}` listed twice", c.state, c.action)));
            }
            if !c.q.is_finite() {
                return Err(corrupt(format!("non-finite value in {} / `{}`", c.state, c.action)));
            }
            agent.q[i] = c.q;
            agent.visits[i] = c.visits;
        }
        Ok(agent)
    }

    /// Bit-level equality, distinguishing e.g. `0.0` from `-0.0`.
    pub fn bit_identical(&self, other: &TutorAgent) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let pbits = |p: &Hyperparams| {
            [p.alpha, p.gamma, p.epsilon, p.epsilon_decay, p.epsilon_floor].map(f64::to_bits)
        };
        self.block_id == other.block_id
            && self.actions == other.actions
            && self.visits == other.visits
            && bits(&self.q) == bits(&other.q)
            && pbits(&self.params) == pbits(&other.params)
    }
}
