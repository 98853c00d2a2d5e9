//! Browser bindings for the Gridlock demo page.
//!
//! Every export takes plain values and returns a JSON string. Failures come
//! back as `{"error": "..."}` so the page never has to catch exceptions.

use gridlock_core::activities::{gen_binary_round, score_binary_round, BinaryRound, Match};
use gridlock_core::content::BlockGraph;
use gridlock_core::dsl::{self, Diagnostic, Machine, Rubric, TraceRow, Violation};
use gridlock_core::sim::{self, ArchetypeMix, TrainConfig};
use gridlock_core::tutor::Hyperparams;
use gridlock_core::TutorState;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[derive(Debug, Serialize)]
pub struct Graded {
    pub score: f64,
    pub diagnostics: Vec<Diagnostic>,
    pub violations: Vec<String>,
    pub checks: Vec<(String, bool)>,
    pub scenarios: Vec<String>,
    pub scenario: Option<String>,
    pub trace: Vec<TraceRow>,
}

fn grade_impl(source: &str, scenario: usize) -> Graded {
    let rubric = Rubric::traffic();
    let mut out = Graded {
        score: 0.0,
        diagnostics: Vec::new(),
        violations: Vec::new(),
        checks: Vec::new(),
        scenarios: rubric.scenarios.iter().map(|s| s.name.clone()).collect(),
        scenario: None,
        trace: Vec::new(),
    };
    let (program, warnings) = match dsl::compile(source) {
        Ok(p) => p,
        Err(diags) => {
            out.diagnostics = diags;
            return out;
        }
    };
    let report = dsl::grade(&program, &rubric);
    out.diagnostics = warnings;
    out.score = report.score;
    out.violations = report.violations.iter().map(Violation::to_string).collect();
    out.checks = report.checks;
    if let (Ok(machine), Some(spec)) = (Machine::compile(&program), rubric.scenarios.get(scenario)) {
        if let Ok(trace) = machine.simulate(&spec.scenario, spec.ticks) {
            out.scenario = Some(spec.name.clone());
            out.trace = trace.rows;
        }
    }
    out
}

/// Compiles and grades a controller, returning the trace of rubric scenario
/// number `scenario`.
#[wasm_bindgen]
pub fn grade_source(source: &str, scenario: usize) -> String {
    respond(Ok(grade_impl(source, scenario)))
}

/// A new binary matching round.
#[wasm_bindgen]
pub fn binary_round(bits: u32, count: usize, seed: u64) -> String {
    respond(gen_binary_round(bits, count, true, seed).map_err(|e| e.to_string()))
}

/// Scores a round. `round` is the JSON from [`binary_round`], `matches` a
/// JSON array of `{binary, decimal}`.
#[wasm_bindgen]
pub fn score_binary(round: &str, matches: &str, elapsed_secs: f64) -> String {
    let result = (|| {
        let round: BinaryRound = serde_json::from_str(round).map_err(|e| format!("round: {e}"))?;
        let matches: Vec<Match> = serde_json::from_str(matches).map_err(|e| format!("matches: {e}"))?;
        let correct = matches.iter().filter(|m| round.pairs.iter().any(|(b, d)| *b == m.binary && *d == m.decimal)).count();
        Ok(json!({
            "score": score_binary_round(&round, &matches, elapsed_secs),
            "correct": correct,
            "total": round.pairs.len(),
        }))
    })();
    respond(result)
}

#[derive(Debug, Serialize)]
pub struct PolicyRow {
    pub block: String,
    pub state: TutorState,
    pub action: String,
    pub visits: u64,
}

#[derive(Debug, Serialize)]
pub struct TrainDemo {
    pub curve: Vec<(usize, f64)>,
    pub first: f64,
    pub last: f64,
    /// Greedy action in the most visited states.
    pub policy: Vec<PolicyRow>,
}

fn train_impl(episodes: usize, seed: u64) -> Result<TrainDemo, String> {
    let graph = BlockGraph::gridlock();
    let mut agents = sim::fresh_agents(&graph, Hyperparams::default());
    let cohort = sim::spawn_cohort(&ArchetypeMix::shipped(), seed);
    let bucket = (episodes / 50).max(1);
    let outcome = sim::train(&mut agents, &graph, &cohort, &TrainConfig { episodes, seed, bucket, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let window = (episodes / 10).max(1);
    let mut policy: Vec<PolicyRow> = agents
        .values()
        .flat_map(|agent| {
            TutorState::all().filter(|&s| agent.state_visits(s) > 0).map(move |s| PolicyRow {
                block: agent.block_id().to_string(),
                state: s,
                action: agent.greedy(s).unwrap_or("none").to_string(),
                visits: agent.state_visits(s),
            })
        })
        .collect();
    policy.sort_by(|a, b| b.visits.cmp(&a.visits).then_with(|| a.block.cmp(&b.block)));
    policy.truncate(12);
    Ok(TrainDemo {
        first: outcome.mean_reward(0..window),
        last: outcome.mean_reward(episodes.saturating_sub(window)..episodes),
        curve: outcome.curve,
        policy,
    })
}

/// Trains fresh tutor agents on the shipped simulated cohort.
#[wasm_bindgen]
pub fn train_demo(episodes: usize, seed: u64) -> String {
    respond(train_impl(episodes.min(20_000), seed))
}

/// Reference controller used to seed the editor.
#[wasm_bindgen]
pub fn example_source() -> String {
    include_str!("../../core/corpus/valid/reference.tl").to_string()
}

/// Block titles in curriculum order.
#[wasm_bindgen]
pub fn curriculum_outline() -> String {
    let g = BlockGraph::gridlock();
    respond(Ok(g.topological().map(|b| (b.id.clone(), b.title.clone())).collect::<Vec<_>>()))
}
