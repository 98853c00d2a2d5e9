//! The tutoring engine behind the HTTP layer.
//!
//! Every state change is an event in the log. Live calls validate, append,
//! then fold the stored event into session and agent state; startup and
//! `replay` fold the same events in log order, so both paths end in the
//! same state. Appends that can touch an agent happen while that agent's
//! lock is held, which keeps each agent's updates in log order.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use gridlock_core::content::{AssistanceAction, AssistanceKind, BlockGraph};
use gridlock_core::dsl::{self, Diagnostic, Machine, TraceRow, Violation};
use gridlock_core::sim::{self, ArchetypeMix, TrainConfig, TrainOutcome};
use gridlock_core::telemetry::{EventLog, EventPayload, TelemetryEvent, TutorState};
use gridlock_core::tutor::{Mode, TutorAgent};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::{Credit, Session};

/// Session id used for events that belong to no student.
pub const ADMIN_SESSION: &str = "_admin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    None,
    PopupDialogue,
    HelpMenuNotification,
    GateChange,
}

impl Delivery {
    pub fn for_kind(kind: AssistanceKind) -> Delivery {
        match kind {
            AssistanceKind::NoAssist => Delivery::None,
            AssistanceKind::HintText | AssistanceKind::PlayDialogue => Delivery::PopupDialogue,
            AssistanceKind::ShowDocSection | AssistanceKind::SuggestVideo | AssistanceKind::MarkHelpMenu => {
                Delivery::HelpMenuNotification
            }
            AssistanceKind::GateRemedialArea => Delivery::GateChange,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistanceDecision {
    pub block: String,
    pub action: AssistanceAction,
    pub delivery: Delivery,
    /// Help content is never opened for the student.
    pub mandatory_open: bool,
    pub state: TutorState,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session: String,
    pub curriculum: String,
    pub train: bool,
    pub seed: u64,
    pub objective: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub session: String,
    pub block: Option<String>,
    pub title: Option<String>,
    pub unlocked: Vec<String>,
    pub completed: Vec<String>,
    pub benchmark: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Submission {
    pub seq: u64,
    pub grade: f64,
    pub diagnostics: Vec<Diagnostic>,
    pub violations: Vec<Violation>,
    pub checks: Vec<(String, bool)>,
    /// Scenario the trace was simulated under.
    pub scenario: Option<String>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineConfig {
    /// New sessions explore and learn online.
    pub train: bool,
    /// Where agent snapshots are written after they change.
    pub live_dir: Option<PathBuf>,
}

pub struct Engine {
    curriculum: Arc<BlockGraph>,
    log: EventLog,
    config: EngineConfig,
    agents: BTreeMap<String, Mutex<TutorAgent>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    idempotency: Mutex<HashMap<(String, String), u64>>,
    next_session: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

/// Agents for every block: `base` where given, fresh otherwise.
pub fn agents_for(curriculum: &BlockGraph, mut base: BTreeMap<String, TutorAgent>) -> Result<BTreeMap<String, TutorAgent>> {
    let mut out = BTreeMap::new();
    for block in curriculum.blocks() {
        let agent = match base.remove(&block.id) {
            Some(a) => {
                let ids: Vec<&str> = block.assistance.iter().map(|x| x.id.as_str()).collect();
                if a.actions().iter().map(String::as_str).ne(ids.iter().copied()) {
                    return Err(ServiceError::Snapshot {
                        path: block.id.clone(),
                        message: "agent actions do not match the block's catalog".into(),
                    });
                }
                a
            }
            None => TutorAgent::for_block(block, Default::default()),
        };
        out.insert(block.id.clone(), agent);
    }
    if let Some(extra) = base.keys().next() {
        return Err(ServiceError::UnknownBlock(extra.clone()));
    }
    Ok(out)
}

/// Reads `<block>.json` snapshots from `dir`; a missing directory means no snapshots.
pub fn load_snapshots(dir: &Path) -> Result<BTreeMap<String, TutorAgent>> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        let agent = TutorAgent::restore(&text)
            .map_err(|e| ServiceError::Snapshot { path: path.display().to_string(), message: e.to_string() })?;
        out.insert(agent.block_id().to_string(), agent);
    }
    Ok(out)
}

pub fn write_snapshot(dir: &Path, agent: &TutorAgent) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.json", agent.block_id()));
    let tmp = dir.join(format!(".{}.json.tmp", agent.block_id()));
    std::fs::write(&tmp, agent.snapshot())?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

impl Engine {
    /// Builds the engine and folds every event already in `log`.
    pub fn new(
        curriculum: BlockGraph,
        base_agents: BTreeMap<String, TutorAgent>,
        log: EventLog,
        config: EngineConfig,
    ) -> Result<Engine> {
        let agents = agents_for(&curriculum, base_agents)?;
        let engine = Engine {
            curriculum: Arc::new(curriculum),
            log,
            config,
            agents: agents.into_iter().map(|(k, v)| (k, Mutex::new(v))).collect(),
            sessions: RwLock::new(HashMap::new()),
            idempotency: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        };
        let existing = engine.log.events();
        for event in &existing {
            engine.replay_event(event)?;
        }
        Ok(engine)
    }

    pub fn curriculum(&self) -> &BlockGraph {
        &self.curriculum
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn training(&self) -> bool {
        self.config.train
    }

    /// Copy of every agent, keyed by block id.
    pub fn agents(&self) -> BTreeMap<String, TutorAgent> {
        self.agents.iter().map(|(k, v)| (k.clone(), lock(v).clone())).collect()
    }

    pub fn agent(&self, block: &str) -> Result<TutorAgent> {
        self.agents.get(block).map(|a| lock(a).clone()).ok_or_else(|| ServiceError::UnknownBlock(block.to_string()))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        let sessions = self.sessions.read().unwrap_or_else(|p| p.into_inner());
        sessions.get(id).cloned().ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn session_snapshot(&self, id: &str) -> Result<Session> {
        let handle = self.session(id)?;
        let s = lock(&handle).clone();
        Ok(s)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let sessions = self.sessions.read().unwrap_or_else(|p| p.into_inner());
        let mut ids: Vec<String> = sessions.keys().cloned().collect();
        ids.sort();
        ids
    }

    fn agent_lock(&self, block: &str) -> Result<MutexGuard<'_, TutorAgent>> {
        self.agents.get(block).map(lock).ok_or_else(|| ServiceError::UnknownBlock(block.to_string()))
    }

    fn persist(&self, agent: &TutorAgent) -> Result<()> {
        match &self.config.live_dir {
            Some(dir) => write_snapshot(dir, agent),
            None => Ok(()),
        }
    }

    fn credit(&self, session_train: bool, credit: Option<Credit>, agent: Option<&mut TutorAgent>) -> Result<()> {
        if let (true, Some(c), Some(agent)) = (session_train, credit, agent) {
            // each decision is scored by the attempt that follows it
            agent.update(c.state, &c.action, c.reward, None)?;
            self.persist(agent)?;
        }
        Ok(())
    }

    pub fn open_session(&self, curriculum: &str, seed: Option<u64>) -> Result<SessionInfo> {
        if curriculum != self.curriculum.id() {
            return Err(ServiceError::UnknownCurriculum(curriculum.to_string()));
        }
        let n = self.next_session.fetch_add(1, Ordering::SeqCst);
        let id = format!("s{n:06}");
        let payload = EventPayload::SessionStarted {
            curriculum: Some(curriculum.to_string()),
            train: self.config.train,
            seed: seed.unwrap_or(n),
        };
        let mut sessions = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        let event = self.log.record_event(&id, now_ms(), payload)?;
        let session = Session::start(&event, &self.curriculum)?;
        let info = SessionInfo {
            session: id.clone(),
            curriculum: session.curriculum.clone(),
            train: session.train,
            seed: session.seed,
            objective: session.objective.clone(),
        };
        sessions.insert(id, Arc::new(Mutex::new(session)));
        Ok(info)
    }

    /// Records a client event. A repeated `idempotency_key` returns the
    /// original seq without recording anything.
    pub fn ingest(&self, session: &str, payload: EventPayload, ts: Option<i64>, idempotency_key: Option<&str>) -> Result<u64> {
        if matches!(
            payload,
            EventPayload::AssistanceShown { .. } | EventPayload::CodeSubmitted { .. } | EventPayload::SessionEnded {}
        ) {
            return Err(ServiceError::ServerOnlyEvent(payload.type_name().to_string()));
        }
        let handle = self.session(session)?;
        let mut s = lock(&handle);
        let key = idempotency_key.map(|k| (session.to_string(), k.to_string()));
        if let Some(k) = &key {
            if let Some(&seq) = lock(&self.idempotency).get(k) {
                return Ok(seq);
            }
        }
        let seq = self.commit(&mut s, payload, ts.unwrap_or_else(now_ms))?.seq;
        if let Some(k) = key {
            lock(&self.idempotency).insert(k, seq);
        }
        Ok(seq)
    }

    fn commit(&self, s: &mut Session, payload: EventPayload, ts: i64) -> Result<TelemetryEvent> {
        s.admit(&self.curriculum, &payload)?;
        let scored = matches!(payload, EventPayload::QuizSubmitted { .. } | EventPayload::CodeSubmitted { .. });
        let mut agent = match payload.block() {
            Some(b) if scored && s.pending.contains_key(b) => Some(self.agent_lock(b)?),
            _ => None,
        };
        let event = self.log.record_event(&s.id, ts, payload)?;
        let credit = s.apply(&self.curriculum, &event)?;
        self.credit(s.train, credit, agent.as_deref_mut())?;
        Ok(event)
    }

    fn decide(&self, s: &Session, agent: &TutorAgent, block: &str) -> Result<(TutorState, String)> {
        let state = self.curriculum.thresholds().discretize(&s.features(block), self.curriculum.thresholds().default_median_secs);
        let mode = if s.train { Mode::Explore } else { Mode::Exploit };
        let action = agent.choose_in_stream(state, mode, s.seed, s.decisions)?;
        Ok((state, action.to_string()))
    }

    pub fn request_assistance(&self, session: &str, block: &str) -> Result<AssistanceDecision> {
        let handle = self.session(session)?;
        let mut s = lock(&handle);
        if s.ended {
            return Err(ServiceError::UnknownSession(session.to_string()));
        }
        let content = self.curriculum.block(block).map_err(|_| ServiceError::UnknownBlock(block.to_string()))?;
        if !s.is_unlocked(&self.curriculum, block) {
            return Err(ServiceError::BlockLocked(block.to_string()));
        }
        let agent = self.agent_lock(block)?;
        let (state, action) = self.decide(&s, &agent, block)?;
        let payload = EventPayload::AssistanceShown { block: block.to_string(), action: action.clone(), state: Some(state) };
        let event = self.log.record_event(&s.id, now_ms(), payload)?;
        s.apply(&self.curriculum, &event)?;
        drop(agent);
        let action = content.action(&action).cloned().expect("agents only hold catalog actions");
        Ok(AssistanceDecision {
            block: block.to_string(),
            delivery: Delivery::for_kind(action.kind),
            action,
            mandatory_open: false,
            state,
            seq: event.seq,
        })
    }

    pub fn submit_code(&self, session: &str, block: &str, source: &str) -> Result<Submission> {
        let handle = self.session(session)?;
        let mut s = lock(&handle);
        if s.ended {
            return Err(ServiceError::UnknownSession(session.to_string()));
        }
        let content = self.curriculum.block(block).map_err(|_| ServiceError::UnknownBlock(block.to_string()))?;
        let Some(rubric) = content.activity.rubric() else {
            return Err(ServiceError::WrongActivityType {
                block: block.to_string(),
                kind: content.activity.kind_name().to_string(),
            });
        };
        if !s.is_unlocked(&self.curriculum, block) {
            return Err(ServiceError::BlockLocked(block.to_string()));
        }
        let mut out = Submission {
            seq: 0,
            grade: 0.0,
            diagnostics: Vec::new(),
            violations: Vec::new(),
            checks: Vec::new(),
            scenario: None,
            trace: Vec::new(),
        };
        match dsl::compile(source) {
            Err(diagnostics) => out.diagnostics = diagnostics,
            Ok((program, warnings)) => {
                out.diagnostics = warnings;
                let report = dsl::grade(&program, &rubric);
                out.grade = report.score;
                out.violations = report.violations;
                out.checks = report.checks;
                if let (Ok(machine), Some(first)) = (Machine::compile(&program), rubric.scenarios.first()) {
                    if let Ok(trace) = machine.simulate(&first.scenario, first.ticks) {
                        out.scenario = Some(first.name.clone());
                        out.trace = trace.rows;
                    }
                }
            }
        }
        let payload = EventPayload::CodeSubmitted { block: block.to_string(), source: source.to_string(), grade: out.grade };
        out.seq = self.commit(&mut s, payload, now_ms())?.seq;
        Ok(out)
    }

    pub fn objective(&self, session: &str) -> Result<Objective> {
        let s = self.session_snapshot(session)?;
        if s.ended {
            return Err(ServiceError::UnknownSession(session.to_string()));
        }
        Ok(Objective {
            session: s.id.clone(),
            title: s.objective.as_deref().and_then(|b| self.curriculum.block(b).ok()).map(|b| b.title.clone()),
            block: s.objective.clone(),
            unlocked: s.unlocked(&self.curriculum),
            completed: s.completed.iter().cloned().collect(),
            benchmark: s.benchmark,
        })
    }

    pub fn end_session(&self, session: &str) -> Result<u64> {
        let handle = self.session(session)?;
        let mut s = lock(&handle);
        Ok(self.commit(&mut s, EventPayload::SessionEnded {}, now_ms())?.seq)
    }

    /// Continues training the live agents on a simulated cohort.
    pub fn train(&self, mix: &ArchetypeMix, episodes: usize, seed: u64) -> Result<TrainOutcome> {
        mix.validate()?;
        let payload = EventPayload::AgentsTrained { mix: mix.to_toml(), episodes, seed };
        let mut guards: Vec<MutexGuard<'_, TutorAgent>> = self.agents.values().map(lock).collect();
        self.log.record_event(ADMIN_SESSION, now_ms(), payload)?;
        self.run_training(&mut guards, mix, episodes, seed)
    }

    fn run_training(
        &self,
        guards: &mut [MutexGuard<'_, TutorAgent>],
        mix: &ArchetypeMix,
        episodes: usize,
        seed: u64,
    ) -> Result<TrainOutcome> {
        let mut agents: BTreeMap<String, TutorAgent> =
            guards.iter().map(|g| (g.block_id().to_string(), (**g).clone())).collect();
        let cohort = sim::spawn_cohort(mix, seed);
        let outcome = sim::train(&mut agents, &self.curriculum, &cohort, &TrainConfig { episodes, seed, ..Default::default() })?;
        for g in guards.iter_mut() {
            **g = agents.remove(g.block_id()).expect("same block set");
            self.persist(g)?;
        }
        Ok(outcome)
    }

    /// Folds one logged event, re-checking any recorded decision.
    fn replay_event(&self, event: &TelemetryEvent) -> Result<()> {
        let diverged = |message: String| ServiceError::ReplayDiverged { seq: event.seq, message };
        match &event.payload {
            EventPayload::SessionStarted { .. } => {
                let session = Session::start(event, &self.curriculum)?;
                if let Some(n) = session.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                    self.next_session.fetch_max(n + 1, Ordering::SeqCst);
                }
                let mut sessions = self.sessions.write().unwrap_or_else(|p| p.into_inner());
                if sessions.contains_key(&session.id) {
                    return Err(diverged(format!("session `{}` started twice", session.id)));
                }
                sessions.insert(session.id.clone(), Arc::new(Mutex::new(session)));
            }
            EventPayload::AgentsTrained { mix, episodes, seed } => {
                let mix = ArchetypeMix::from_toml(mix)?;
                let mut guards: Vec<MutexGuard<'_, TutorAgent>> = self.agents.values().map(lock).collect();
                self.run_training(&mut guards, &mix, *episodes, *seed)?;
            }
            payload => {
                let handle = self.session(&event.session).map_err(|_| diverged(format!("event for unknown session `{}`", event.session)))?;
                let mut s = lock(&handle);
                s.admit(&self.curriculum, payload).or_else(|e| match (e, payload) {
                    // server-recorded types are refused from clients, not from the log
                    (ServiceError::ServerOnlyEvent(_), _) => Ok(()),
                    (e, _) => Err(diverged(e.to_string())),
                })?;
                let mut agent = match payload {
                    EventPayload::AssistanceShown { block, action, state } => {
                        let agent = self.agent_lock(block)?;
                        let (want_state, want_action) = self.decide(&s, &agent, block)?;
                        if Some(want_state) != *state || want_action != *action {
                            return Err(diverged(format!(
                                "recorded decision {action} in {state:?} but the agent now picks {want_action} in {want_state}"
                            )));
                        }
                        None
                    }
                    p => match p.block() {
                        Some(b) if p.score().is_some() && s.pending.contains_key(b) => Some(self.agent_lock(b)?),
                        _ => None,
                    },
                };
                let credit = s.apply(&self.curriculum, event)?;
                self.credit(s.train, credit, agent.as_deref_mut())?;
            }
        }
        Ok(())
    }
}

/// Rebuilds engine state from a log file without writing anything.
pub fn replay(curriculum: BlockGraph, base_agents: BTreeMap<String, TutorAgent>, events: Vec<TelemetryEvent>) -> Result<Engine> {
    let log = EventLog::in_memory();
    let engine = Engine::new(curriculum, base_agents, log, EngineConfig::default())?;
    for e in &events {
        engine.replay_event(e)?;
    }
    Ok(engine)
}
