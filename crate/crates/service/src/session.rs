use std::collections::{BTreeMap, BTreeSet};

use gridlock_core::content::{BlockGraph, POST_TEST_BLOCK};
use gridlock_core::telemetry::{features_for, BlockFeatures, EventPayload, TelemetryEvent, TutorState};
use gridlock_core::tutor::{reward_from, Reward};
use serde::Serialize;

use crate::error::{Result, ServiceError};

/// Assistance shown in a block and not yet credited.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pending {
    pub action: String,
    pub state: TutorState,
    /// Seq of the `AssistanceShown` event.
    pub shown: u64,
}

/// Reward owed to a block's agent for an earlier decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Credit {
    pub block: String,
    pub state: TutorState,
    pub action: String,
    pub reward: Reward,
}

/// Per-session state, rebuilt purely from the session's own events.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub curriculum: String,
    pub train: bool,
    pub seed: u64,
    pub events: Vec<TelemetryEvent>,
    pub completed: BTreeSet<String>,
    pub objective: Option<String>,
    /// Entry-knowledge score, fixed when the first block completes.
    pub benchmark: Option<f64>,
    pub post_test: Option<f64>,
    pub pending: BTreeMap<String, Pending>,
    /// Number of assistance decisions so far; selects the exploration stream.
    pub decisions: u64,
    pub ended: bool,
}

impl Session {
    pub fn start(event: &TelemetryEvent, graph: &BlockGraph) -> Result<Session> {
        let EventPayload::SessionStarted { curriculum, train, seed } = &event.payload else {
            return Err(ServiceError::BadRequest(format!("session `{}` does not begin with SessionStarted", event.session)));
        };
        if let Some(c) = curriculum {
            if c != graph.id() {
                return Err(ServiceError::UnknownCurriculum(c.clone()));
            }
        }
        let mut s = Session {
            id: event.session.clone(),
            curriculum: graph.id().to_string(),
            train: *train,
            seed: *seed,
            events: vec![event.clone()],
            completed: BTreeSet::new(),
            objective: None,
            benchmark: None,
            post_test: None,
            pending: BTreeMap::new(),
            decisions: 0,
            ended: false,
        };
        s.objective = s.unlocked(graph).into_iter().next();
        Ok(s)
    }

    pub fn features(&self, block: &str) -> BlockFeatures {
        features_for(&self.events, &self.id, block)
    }

    /// Unlocked blocks in topological order.
    pub fn unlocked(&self, graph: &BlockGraph) -> Vec<String> {
        graph.unlocked_in_order(&self.completed).expect("completed blocks come from the curriculum")
    }

    pub fn is_unlocked(&self, graph: &BlockGraph, block: &str) -> bool {
        self.unlocked(graph).iter().any(|b| b == block)
    }

    /// Rejects events this session cannot accept in its current state.
    pub fn admit(&self, graph: &BlockGraph, payload: &EventPayload) -> Result<()> {
        if self.ended {
            return Err(ServiceError::UnknownSession(self.id.clone()));
        }
        let block = payload.block();
        if let Some(b) = block {
            let post = b == POST_TEST_BLOCK && matches!(payload, EventPayload::QuizSubmitted { .. });
            if !post && !graph.contains(b) {
                return Err(ServiceError::UnknownBlock(b.to_string()));
            }
        }
        match payload {
            EventPayload::SessionStarted { .. } | EventPayload::AgentsTrained { .. } => {
                Err(ServiceError::ServerOnlyEvent(payload.type_name().to_string()))
            }
            EventPayload::BlockCompleted { block } if !self.completed.contains(block) => {
                if self.is_unlocked(graph, block) {
                    Ok(())
                } else {
                    Err(ServiceError::BlockLocked(block.clone()))
                }
            }
            EventPayload::AssistanceShown { block, .. } | EventPayload::CodeSubmitted { block, .. } => {
                if self.is_unlocked(graph, block) {
                    Ok(())
                } else {
                    Err(ServiceError::BlockLocked(block.clone()))
                }
            }
            _ => Ok(()),
        }
    }

    /// Folds one event into the session. Returns the reward owed for a
    /// pending decision when the event is a scored attempt in that block.
    pub fn apply(&mut self, graph: &BlockGraph, event: &TelemetryEvent) -> Result<Option<Credit>> {
        let mut credit = None;
        match &event.payload {
            EventPayload::QuizSubmitted { block, score } | EventPayload::CodeSubmitted { block, grade: score, .. } => {
                if let Some(p) = self.pending.remove(block) {
                    let before = self.features(block).latest_score;
                    credit = Some(Credit {
                        block: block.clone(),
                        state: p.state,
                        action: p.action,
                        reward: reward_from(before, *score)?,
                    });
                }
                if block == POST_TEST_BLOCK {
                    self.post_test = Some(*score);
                }
            }
            EventPayload::AssistanceShown { block, action, state } => {
                let state = state.ok_or_else(|| ServiceError::ReplayDiverged {
                    seq: event.seq,
                    message: "assistance event has no recorded state".into(),
                })?;
                self.pending.insert(block.clone(), Pending { action: action.clone(), state, shown: event.seq });
                self.decisions += 1;
            }
            EventPayload::BlockCompleted { block } => {
                // completing without another scored attempt forfeits the reward
                self.pending.remove(block);
                if self.completed.insert(block.clone()) {
                    let first = graph.topological().next().map(|b| b.id.as_str());
                    if first == Some(block.as_str()) && self.benchmark.is_none() {
                        self.benchmark = self.features(block).latest_score;
                    }
                }
            }
            EventPayload::SessionEnded {} => {
                self.pending.clear();
                self.ended = true;
            }
            _ => {}
        }
        self.events.push(event.clone());
        self.objective = self.unlocked(graph).into_iter().next();
        Ok(credit)
    }
}
