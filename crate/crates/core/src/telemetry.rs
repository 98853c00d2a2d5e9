//! Event-sourced telemetry: the append-only event log, per-block feature
//! aggregation, and discretization into the tutor's state space.
//!
//! Log file format: UTF-8, one JSON object per line with the fields `seq`,
//! `ts` (milliseconds since the epoch), `session`, `type` and `payload`.
//! Floats are written in shortest round-trip form, so replaying a log
//! reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLabel {
    Engaged,
    Neutral,
    Frustrated,
    Bored,
    #[default]
    Unknown,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 5] = [
        EmotionLabel::Engaged,
        EmotionLabel::Neutral,
        EmotionLabel::Frustrated,
        EmotionLabel::Bored,
        EmotionLabel::Unknown,
    ];
}

/// Type-specific part of an event. Serialized as `"type"` plus `"payload"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum EventPayload {
    SessionStarted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        curriculum: Option<String>,
        /// Assistance decisions in this session explore and update the agents.
        #[serde(default)]
        train: bool,
        /// Seed for exploratory decisions.
        #[serde(default)]
        seed: u64,
    },
    BlockEntered {
        block: String,
    },
    QuizSubmitted {
        block: String,
        score: f64,
    },
    ActivityAction {
        block: String,
        count: u64,
    },
    InputActivity {
        mouse_moves: u64,
        key_presses: u64,
        window_secs: f64,
    },
    EmotionSample {
        label: EmotionLabel,
    },
    AssistanceShown {
        block: String,
        action: String,
        /// State the decision was made in.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<TutorState>,
    },
    HelpOpened {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        section: Option<String>,
    },
    CodeSubmitted {
        block: String,
        source: String,
        grade: f64,
    },
    BlockCompleted {
        block: String,
    },
    SessionEnded {},
    /// Offline training run applied to the live agents.
    AgentsTrained {
        /// Archetype mix document.
        mix: String,
        episodes: usize,
        seed: u64,
    },
}

impl EventPayload {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventPayload::SessionStarted { .. } => "SessionStarted",
            EventPayload::BlockEntered { .. } => "BlockEntered",
            EventPayload::QuizSubmitted { .. } => "QuizSubmitted",
            EventPayload::ActivityAction { .. } => "ActivityAction",
            EventPayload::InputActivity { .. } => "InputActivity",
            EventPayload::EmotionSample { .. } => "EmotionSample",
            EventPayload::AssistanceShown { .. } => "AssistanceShown",
            EventPayload::HelpOpened { .. } => "HelpOpened",
            EventPayload::CodeSubmitted { .. } => "CodeSubmitted",
            EventPayload::BlockCompleted { .. } => "BlockCompleted",
            EventPayload::SessionEnded {} => "SessionEnded",
            EventPayload::AgentsTrained { .. } => "AgentsTrained",
        }
    }

    /// Block named explicitly by the payload.
    pub fn block(&self) -> Option<&str> {
        match self {
            EventPayload::BlockEntered { block }
            | EventPayload::QuizSubmitted { block, .. }
            | EventPayload::ActivityAction { block, .. }
            | EventPayload::AssistanceShown { block, .. }
            | EventPayload::CodeSubmitted { block, .. }
            | EventPayload::BlockCompleted { block } => Some(block),
            EventPayload::HelpOpened { block, .. } => block.as_deref(),
            _ => None,
        }
    }

    /// Score carried by a scored attempt.
    pub fn score(&self) -> Option<f64> {
        match self {
            EventPayload::QuizSubmitted { score, .. } => Some(*score),
            EventPayload::CodeSubmitted { grade, .. } => Some(*grade),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        let bad = |field: &str, message: String| TelemetryError::InvalidPayload { field: field.to_string(), message };
        if let Some(block) = self.block() {
            if block.is_empty() {
                return Err(bad("block", "must not be empty".into()));
            }
        }
        match self {
            EventPayload::QuizSubmitted { score: v, .. } | EventPayload::CodeSubmitted { grade: v, .. } => {
                let field = if matches!(self, EventPayload::QuizSubmitted { .. }) { "score" } else { "grade" };
                if !(0.0..=1.0).contains(v) {
                    return Err(bad(field, format!("{v} is outside [0, 1]")));
                }
            }
            EventPayload::InputActivity { window_secs, .. } => {
                if !window_secs.is_finite() || *window_secs <= 0.0 {
                    return Err(bad("window_secs", format!("{window_secs} is not a positive duration")));
                }
            }
            EventPayload::AssistanceShown { action, .. } if action.is_empty() => {
                return Err(bad("action", "must not be empty".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub ts: i64,
    pub session: String,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("invalid payload field `{field}`: {message}")]
    InvalidPayload { field: String, message: String },
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("corrupt log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
}

impl From<std::io::Error> for TelemetryError {
    fn from(e: std::io::Error) -> Self {
        TelemetryError::StorageFailure(e.to_string())
    }
}

struct LogInner {
    events: Vec<TelemetryEvent>,
    file: Option<File>,
}

/// Append-only event log, optionally mirrored to an NDJSON file.
///
/// Appends are serialized; each is written and synced before its sequence
/// number is returned.
pub struct EventLog {
    inner: Mutex<LogInner>,
    path: Option<PathBuf>,
}

impl Default for EventLog {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog").field("path", &self.path).field("len", &self.len()).finish()
    }
}

impl EventLog {
    pub fn in_memory() -> EventLog {
        EventLog { inner: Mutex::new(LogInner { events: Vec::new(), file: None }), path: None }
    }

    /// Opens (or creates) a log file, loading the events already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<EventLog, TelemetryError> {
        let path = path.as_ref();
        let events = if path.exists() { read_log(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EventLog {
            inner: Mutex::new(LogInner { events, file: Some(file) }),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, LogInner> {
        // a panic while holding the lock cannot leave a half-pushed event
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Validates and appends an event, returning its sequence number.
    pub fn record(&self, session: &str, ts: i64, payload: EventPayload) -> Result<u64, TelemetryError> {
        Ok(self.record_event(session, ts, payload)?.seq)
    }

    /// Like [`record`](Self::record) but returns the stored event.
    pub fn record_event(&self, session: &str, ts: i64, payload: EventPayload) -> Result<TelemetryEvent, TelemetryError> {
        if session.is_empty() {
            return Err(TelemetryError::InvalidPayload {
                field: "session".into(),
                message: "must not be empty".into(),
            });
        }
        payload.validate()?;
        let mut inner = self.lock();
        let seq = inner.events.last().map_or(1, |e| e.seq + 1);
        let event = TelemetryEvent { seq, ts, session: session.to_string(), payload };
        if let Some(file) = inner.file.as_mut() {
            let mut line = serde_json::to_string(&event).map_err(|e| TelemetryError::StorageFailure(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        inner.events.push(event.clone());
        Ok(event)
    }

    pub fn len(&self) -> usize {
        self.lock().events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copy of the current log.
    pub fn events(&self) -> Vec<TelemetryEvent> {
        self.lock().events.clone()
    }

    pub fn session_events(&self, session: &str) -> Vec<TelemetryEvent> {
        self.lock().events.iter().filter(|e| e.session == session).cloned().collect()
    }

    /// Runs `f` over the log without copying it.
    pub fn with_events<R>(&self, f: impl FnOnce(&[TelemetryEvent]) -> R) -> R {
        f(&self.lock().events)
    }
}

/// Reads every event of a log file, checking that seq strictly increases.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<TelemetryEvent>, TelemetryError> {
    let reader = BufReader::new(File::open(path)?);
    let mut events: Vec<TelemetryEvent> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TelemetryEvent = serde_json::from_str(&line)
            .map_err(|e| TelemetryError::CorruptLog { line: i + 1, message: e.to_string() })?;
        if let Some(prev) = events.last() {
            if event.seq <= prev.seq {
                return Err(TelemetryError::CorruptLog {
                    line: i + 1,
                    message: format!("seq {} does not follow {}", event.seq, prev.seq),
                });
            }
        }
        events.push(event);
    }
    Ok(events)
}

/// Serializes events in log-file format.
pub fn write_log<W: Write>(events: &[TelemetryEvent], mut out: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-block aggregate of one session's events.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockFeatures {
    pub latest_score: Option<f64>,
    pub time_in_block: f64,
    /// Scored attempts (quiz and code submissions).
    pub attempts: u32,
    /// Mouse and key events per minute.
    pub activity_rate: f64,
    /// Sum of `ActivityAction` counts.
    pub actions: u64,
    pub emotion_mode: EmotionLabel,
}

/// Aggregates the events of `session` that belong to `block`.
///
/// Input and emotion samples belong to the block the session is currently
/// in: the last one entered and not yet completed. A visit to the block
/// lasts from `BlockEntered` to the last event that belongs to the block
/// before the session moves on, so a `BlockCompleted` ends the visit and an
/// idle gap before entering another block is not counted.
pub fn features_for<'a>(
    events: impl IntoIterator<Item = &'a TelemetryEvent>,
    session: &str,
    block: &str,
) -> BlockFeatures {
    let mut f = BlockFeatures::default();
    let mut current: Option<&str> = None;
    let mut visit_start: Option<i64> = None;
    let mut visit_end: i64 = 0;
    let mut time_ms: i64 = 0;
    let mut inputs: u64 = 0;
    let mut window_secs = 0.0;
    // label -> (count, seq of latest sample)
    let mut emotions: BTreeMap<EmotionLabel, (u32, u64)> = BTreeMap::new();

    for e in events.into_iter().filter(|e| e.session == session) {
        let mine = match &e.payload {
            EventPayload::InputActivity { .. } | EventPayload::EmotionSample { .. } => current == Some(block),
            p => p.block() == Some(block),
        };
        if let EventPayload::BlockEntered { block: b } = &e.payload {
            if let Some(start) = visit_start.take() {
                time_ms += visit_end - start;
            }
            current = Some(b.as_str());
            if b == block {
                visit_start = Some(e.ts);
                visit_end = e.ts;
            }
            continue;
        }
        if !mine {
            continue;
        }
        if visit_start.is_some() {
            visit_end = visit_end.max(e.ts);
        }
        match &e.payload {
            EventPayload::QuizSubmitted { score, .. } | EventPayload::CodeSubmitted { grade: score, .. } => {
                f.latest_score = Some(*score);
                f.attempts += 1;
            }
            EventPayload::ActivityAction { count, .. } => f.actions += count,
            EventPayload::InputActivity { mouse_moves, key_presses, window_secs: w } => {
                inputs += mouse_moves + key_presses;
                window_secs += w;
            }
            EventPayload::EmotionSample { label } => {
                let slot = emotions.entry(*label).or_default();
                slot.0 += 1;
                slot.1 = e.seq;
            }
            EventPayload::BlockCompleted { .. } => {
                if let Some(start) = visit_start.take() {
                    time_ms += visit_end - start;
                }
                current = None;
            }
            _ => {}
        }
    }
    if let Some(start) = visit_start {
        time_ms += visit_end - start;
    }

    f.time_in_block = time_ms.max(0) as f64 / 1000.0;
    if window_secs > 0.0 {
        f.activity_rate = inputs as f64 / (window_secs / 60.0);
    }
    if let Some((label, _)) = emotions.iter().max_by_key(|(_, &(count, last))| (count, last)) {
        f.emotion_mode = *label;
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreBucket {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBucket {
    Fast,
    Normal,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptsBucket {
    First,
    Retry,
    Many,
}

impl ScoreBucket {
    pub const ALL: [ScoreBucket; 3] = [ScoreBucket::Low, ScoreBucket::Mid, ScoreBucket::High];
}

impl TimeBucket {
    pub const ALL: [TimeBucket; 3] = [TimeBucket::Fast, TimeBucket::Normal, TimeBucket::Slow];
}

impl AttemptsBucket {
    pub const ALL: [AttemptsBucket; 3] = [AttemptsBucket::First, AttemptsBucket::Retry, AttemptsBucket::Many];
}

/// Discretized student state; one row of a tutor agent's Q-table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TutorState {
    pub score: ScoreBucket,
    pub time: TimeBucket,
    pub emotion: EmotionLabel,
    pub attempts: AttemptsBucket,
}

impl TutorState {
    pub const COUNT: usize = 3 * 3 * 5 * 3;

    pub fn index(&self) -> usize {
        let e = EmotionLabel::ALL.iter().position(|&l| l == self.emotion).unwrap_or(4);
        ((self.score as usize * 3 + self.time as usize) * 5 + e) * 3 + self.attempts as usize
    }

    pub fn from_index(i: usize) -> Option<TutorState> {
        if i >= Self::COUNT {
            return None;
        }
        Some(TutorState {
            attempts: AttemptsBucket::ALL[i % 3],
            emotion: EmotionLabel::ALL[(i / 3) % 5],
            time: TimeBucket::ALL[(i / 15) % 3],
            score: ScoreBucket::ALL[i / 45],
        })
    }

    pub fn all() -> impl Iterator<Item = TutorState> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }
}

impl std::fmt::Display for TutorState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).unwrap_or_default();
        write!(f, "({}, {}, {}, {})", s["score"].as_str().unwrap_or("?"), s["time"].as_str().unwrap_or("?"),
            s["emotion"].as_str().unwrap_or("?"), s["attempts"].as_str().unwrap_or("?"))
    }
}

/// Bucket boundaries. Each lower boundary belongs to the upper bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub score_mid: f64,
    pub score_high: f64,
    /// Faster than `fast_ratio` x median is fast.
    pub fast_ratio: f64,
    /// Slower than `slow_ratio` x median is slow.
    pub slow_ratio: f64,
    /// Median block time used before any cohort data exists.
    pub default_median_secs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { score_mid: 0.5, score_high: 0.8, fast_ratio: 0.75, slow_ratio: 1.5, default_median_secs: 300.0 }
    }
}

impl Thresholds {
    pub fn discretize(&self, features: &BlockFeatures, cohort_median_time: f64) -> TutorState {
        let median = if cohort_median_time > 0.0 { cohort_median_time } else { self.default_median_secs };
        let score = match features.latest_score {
            Some(s) if s >= self.score_high => ScoreBucket::High,
            Some(s) if s >= self.score_mid => ScoreBucket::Mid,
            _ => ScoreBucket::Low,
        };
        let t = features.time_in_block;
        let time = if t < self.fast_ratio * median {
            TimeBucket::Fast
        } else if t > self.slow_ratio * median {
            TimeBucket::Slow
        } else {
            TimeBucket::Normal
        };
        let attempts = match features.attempts {
            0 | 1 => AttemptsBucket::First,
            2 => AttemptsBucket::Retry,
            _ => AttemptsBucket::Many,
        };
        TutorState { score, time, emotion: features.emotion_mode, attempts }
    }
}

/// Discretizes with the default thresholds.
pub fn discretize(features: &BlockFeatures, cohort_median_time: f64) -> TutorState {
    Thresholds::default().discretize(features, cohort_median_time)
}
