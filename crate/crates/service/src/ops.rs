//! Offline operations behind the CLI: training, replay verification,
//! grading and cohort reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gridlock_core::activities::{cohort_report, CohortReport};
use gridlock_core::content::BlockGraph;
use gridlock_core::dsl::{self, Diagnostic, GradeReport, Rubric};
use gridlock_core::sim::{self, ArchetypeMix, TrainConfig, TrainOutcome};
use gridlock_core::telemetry::{read_log, EventPayload, TelemetryEvent};
use gridlock_core::tutor::{Hyperparams, TutorAgent};
use serde::Serialize;

use crate::engine::{self, load_snapshots, write_snapshot, ADMIN_SESSION};
use crate::error::{Result, ServiceError};
use crate::session::Session;

pub const LOG_FILE: &str = "events.ndjson";
pub const LIVE_DIR: &str = "live";
pub const CURVE_FILE: &str = "learning_curve.csv";

/// Pre-trains fresh agents and writes one snapshot per block plus the
/// learning curve into `out`.
pub fn train_to_dir(curriculum: &BlockGraph, mix: &ArchetypeMix, episodes: usize, seed: u64, out: &Path) -> Result<TrainOutcome> {
    mix.validate()?;
    let mut agents = sim::fresh_agents(curriculum, Hyperparams::default());
    let cohort = sim::spawn_cohort(mix, seed);
    let outcome = sim::train(&mut agents, curriculum, &cohort, &TrainConfig { episodes, seed, ..Default::default() })?;
    for agent in agents.values() {
        write_snapshot(out, agent)?;
    }
    let file = std::fs::File::create(out.join(CURVE_FILE))?;
    outcome.write_curve_csv(file).map_err(|e| ServiceError::Io(std::io::Error::other(e)))?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCheck {
    pub block: String,
    /// Snapshot the rebuilt agent was compared against.
    pub expected: String,
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub events: usize,
    pub sessions: usize,
    pub blocks: Vec<BlockCheck>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.blocks.iter().all(|b| b.identical)
    }
}

/// Rebuilds every agent from the base snapshots in `agents_dir` and the
/// log, then compares each with the live snapshot the server wrote (or the
/// base snapshot when the agent never changed).
pub fn replay_verify(curriculum: &BlockGraph, log: &Path, agents_dir: &Path) -> Result<VerifyReport> {
    let events = read_log(log)?;
    let base = load_snapshots(agents_dir)?;
    let live = load_snapshots(&agents_dir.join(LIVE_DIR))?;
    let n = events.len();
    let rebuilt = engine::replay(curriculum.clone(), base.clone(), events)?;
    let base = engine::agents_for(curriculum, base)?;
    let blocks = rebuilt
        .agents()
        .into_iter()
        .map(|(block, agent)| {
            let (expected, reference): (String, &TutorAgent) = match live.get(&block) {
                Some(a) => (agents_dir.join(LIVE_DIR).join(format!("{block}.json")).display().to_string(), a),
                None => ("base".to_string(), &base[&block]),
            };
            BlockCheck { identical: agent.bit_identical(reference), block, expected }
        })
        .collect();
    Ok(VerifyReport { events: n, sessions: rebuilt.session_ids().len(), blocks })
}

/// Session id, entry benchmark and post-test score.
pub type SessionScores = (String, Option<f64>, Option<f64>);

/// Scores of every session, in order of first appearance.
pub fn session_scores(curriculum: &BlockGraph, events: &[TelemetryEvent]) -> Result<Vec<SessionScores>> {
    let mut sessions: BTreeMap<String, Session> = BTreeMap::new();
    let mut order = Vec::new();
    for e in events {
        if e.session == ADMIN_SESSION {
            continue;
        }
        if matches!(e.payload, EventPayload::SessionStarted { .. }) {
            order.push(e.session.clone());
            sessions.insert(e.session.clone(), Session::start(e, curriculum)?);
        } else if let Some(s) = sessions.get_mut(&e.session) {
            s.apply(curriculum, e)?;
        } else {
            return Err(ServiceError::ReplayDiverged { seq: e.seq, message: format!("unknown session `{}`", e.session) });
        }
    }
    Ok(order.into_iter().map(|id| {
        let s = &sessions[&id];
        (id, s.benchmark, s.post_test)
    }).collect())
}

/// Pre/post pairs of the sessions that have both scores.
pub fn group_pairs(curriculum: &BlockGraph, events: &[TelemetryEvent]) -> Result<Vec<(f64, f64)>> {
    Ok(session_scores(curriculum, events)?
        .into_iter()
        .filter_map(|(_, pre, post)| Some((pre?, post?)))
        .collect())
}

/// One report group per log file, labelled with the file stem.
pub fn report_logs(curriculum: &BlockGraph, logs: &[PathBuf]) -> Result<Vec<CohortReport>> {
    let mut groups = Vec::new();
    for path in logs {
        let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        groups.push((label, group_pairs(curriculum, &read_log(path)?)?));
    }
    cohort_report(&groups).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileGrade {
    pub diagnostics: Vec<Diagnostic>,
    pub report: Option<GradeReport>,
}

impl FileGrade {
    pub fn score(&self) -> f64 {
        self.report.as_ref().map_or(0.0, |r| r.score)
    }
}

pub fn grade_source(source: &str, rubric: &Rubric) -> FileGrade {
    match dsl::compile(source) {
        Err(diagnostics) => FileGrade { diagnostics, report: None },
        Ok((program, diagnostics)) => FileGrade { diagnostics, report: Some(dsl::grade(&program, rubric)) },
    }
}
