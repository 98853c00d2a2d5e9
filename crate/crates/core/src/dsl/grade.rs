//! Rubric-based autograder. A rubric is a set of weighted behavioural checks
//! evaluated over simulation traces of a few input scenarios.

use serde::{Deserialize, Serialize};

use super::ast::{Color, FsmProgram, Signal};
use super::machine::{Machine, Scenario, SimTrace};
use super::Diagnostic;
use crate::docfmt::{self, DocError};

const TRAFFIC_RUBRIC: &str = include_str!("../../data/traffic_rubric.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// No tick where both directions are GREEN, or one GREEN and the other YELLOW.
    Safety { weight: f64 },
    /// Each direction only changes GREEN→YELLOW→RED→GREEN, and the
    /// GREEN→YELLOW→RED sequence is observed at least once.
    CycleOrder { weight: f64 },
    /// Every YELLOW run lasts between `min` and `max` ticks.
    YellowDwell { weight: f64, min: usize, max: usize },
    /// `signal` turns GREEN within `within` ticks whenever `input` stays true that long.
    SensorResponse { weight: f64, input: String, signal: Signal, within: usize },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Safety { .. } => "safety",
            Check::CycleOrder { .. } => "cycle_order",
            Check::YellowDwell { .. } => "yellow_dwell",
            Check::SensorResponse { .. } => "sensor_response",
        }
    }

    pub fn weight(&self) -> f64 {
        match self {
            Check::Safety { weight }
            | Check::CycleOrder { weight }
            | Check::YellowDwell { weight, .. }
            | Check::SensorResponse { weight, .. } => *weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub ticks: usize,
    #[serde(flatten)]
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubric {
    pub checks: Vec<Check>,
    pub scenarios: Vec<ScenarioSpec>,
}

impl Rubric {
    /// The shipped traffic-light rubric.
    pub fn traffic() -> Rubric {
        Rubric::from_toml(TRAFFIC_RUBRIC).expect("shipped rubric is valid")
    }

    pub fn from_toml(text: &str) -> Result<Rubric, DocError> {
        let mut rubric: Rubric = docfmt::from_toml(text)?;
        for check in &rubric.checks {
            let w = check.weight();
            if !(w.is_finite() && w >= 0.0) {
                return Err(DocError {
                    location: None,
                    message: format!("check `{}` has invalid weight {w}", check.name()),
                });
            }
        }
        for s in &mut rubric.scenarios {
            s.scenario.normalize();
        }
        Ok(rubric)
    }

    pub fn to_toml(&self) -> String {
        docfmt::to_toml(self)
    }

    pub fn without_check(&self, index: usize) -> Rubric {
        let mut r = self.clone();
        r.checks.remove(index);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Name of the failed check, or `diagnostic` / `simulation`.
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.check)?;
        if let Some(s) = &self.scenario {
            write!(f, " [{s}")?;
            if let Some(t) = self.tick {
                write!(f, " tick {t}")?;
            }
            if let Some(st) = &self.state {
                write!(f, " in {st}")?;
            }
            write!(f, "]")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeReport {
    pub score: f64,
    pub violations: Vec<Violation>,
    /// Per-check outcome, in rubric order.
    pub checks: Vec<(String, bool)>,
    /// Scenario traces the checks ran on.
    #[serde(skip)]
    pub traces: Vec<(String, SimTrace)>,
}

impl GradeReport {
    pub fn has_violation(&self, check: &str) -> bool {
        self.violations.iter().any(|v| v.check == check)
    }
}

/// Score in [0,1]: the weight of passed checks over the total weight.
pub fn grade(program: &FsmProgram, rubric: &Rubric) -> GradeReport {
    let machine = match Machine::compile(program) {
        Ok(m) => m,
        Err(diags) => return gated(diags),
    };
    grade_machine(&machine, rubric)
}

fn gated(diags: Vec<Diagnostic>) -> GradeReport {
    GradeReport {
        score: 0.0,
        violations: diags
            .into_iter()
            .map(|d| Violation {
                check: "diagnostic".into(),
                scenario: None,
                tick: None,
                state: None,
                message: format!("{}:{}: {}", d.line, d.column, d.message),
            })
            .collect(),
        checks: Vec::new(),
        traces: Vec::new(),
    }
}

pub fn grade_machine(machine: &Machine, rubric: &Rubric) -> GradeReport {
    let mut traces = Vec::new();
    for spec in &rubric.scenarios {
        match machine.simulate(&spec.scenario, spec.ticks) {
            Ok(t) => traces.push((spec.name.clone(), t)),
            Err(e) => {
                return GradeReport {
                    score: 0.0,
                    violations: vec![Violation {
                        check: "simulation".into(),
                        scenario: Some(spec.name.clone()),
                        tick: None,
                        state: None,
                        message: e.to_string(),
                    }],
                    checks: Vec::new(),
                    traces,
                }
            }
        }
    }

    let mut violations = Vec::new();
    let mut checks = Vec::new();
    let mut passed = 0.0;
    let mut total = 0.0;
    for check in &rubric.checks {
        let found = run_check(check, &traces);
        total += check.weight();
        if found.is_empty() {
            passed += check.weight();
        }
        checks.push((check.name().to_string(), found.is_empty()));
        violations.extend(found);
    }
    let score = if total > 0.0 { (passed / total).clamp(0.0, 1.0) } else { 1.0 };
    GradeReport { score, violations, checks, traces }
}

fn violation(check: &Check, scenario: &str, tick: Option<usize>, trace: &SimTrace, message: String) -> Violation {
    Violation {
        check: check.name().into(),
        scenario: Some(scenario.into()),
        tick,
        state: tick.and_then(|t| trace.rows.get(t)).map(|r| r.state.clone()),
        message,
    }
}

pub fn conflicting(ns: Color, ew: Color) -> bool {
    matches!(
        (ns, ew),
        (Color::Green, Color::Green) | (Color::Green, Color::Yellow) | (Color::Yellow, Color::Green)
    )
}

fn legal_change(from: Color, to: Color) -> bool {
    matches!(
        (from, to),
        (Color::Green, Color::Yellow) | (Color::Yellow, Color::Red) | (Color::Red, Color::Green)
    )
}

/// Maximal runs of `color` on `signal` as (start, len).
fn runs(trace: &SimTrace, signal: Signal, color: Color) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, row) in trace.rows.iter().enumerate() {
        match (row.color(signal) == color, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, trace.rows.len() - s));
    }
    out
}

fn run_check(check: &Check, traces: &[(String, SimTrace)]) -> Vec<Violation> {
    let mut found = Vec::new();
    match check {
        Check::Safety { .. } => {
            for (name, trace) in traces {
                if let Some(row) = trace.rows.iter().find(|r| conflicting(r.ns, r.ew)) {
                    found.push(violation(
                        check,
                        name,
                        Some(row.tick),
                        trace,
                        format!("ns={} while ew={} in state `{}` at tick {}", row.ns, row.ew, row.state, row.tick),
                    ));
                }
            }
        }
        Check::CycleOrder { .. } => {
            for signal in Signal::ALL {
                let mut observed = false;
                for (name, trace) in traces {
                    let bad = trace
                        .rows
                        .windows(2)
                        .find(|w| w[0].color(signal) != w[1].color(signal) && !legal_change(w[0].color(signal), w[1].color(signal)));
                    if let Some(w) = bad {
                        found.push(violation(
                            check,
                            name,
                            Some(w[1].tick),
                            trace,
                            format!(
                                "{} changes {}→{} at tick {}",
                                signal.keyword(),
                                w[0].color(signal),
                                w[1].color(signal),
                                w[1].tick
                            ),
                        ));
                    }
                    observed |= runs(trace, signal, Color::Yellow).iter().any(|&(start, len)| {
                        start > 0
                            && start + len < trace.rows.len()
                            && trace.rows[start - 1].color(signal) == Color::Green
                            && trace.rows[start + len].color(signal) == Color::Red
                    });
                }
                if !observed {
                    found.push(Violation {
                        check: check.name().into(),
                        scenario: None,
                        tick: None,
                        state: None,
                        message: format!("{} never goes GREEN→YELLOW→RED", signal.keyword()),
                    });
                }
            }
        }
        Check::YellowDwell { min, max, .. } => {
            for (name, trace) in traces {
                for signal in Signal::ALL {
                    for (start, len) in runs(trace, signal, Color::Yellow) {
                        let complete = start > 0 && start + len < trace.rows.len();
                        if len > *max || (complete && len < *min) {
                            found.push(violation(
                                check,
                                name,
                                Some(start),
                                trace,
                                format!(
                                    "{} yellow lasts {len} ticks from tick {start} (allowed {min}..={max})",
                                    signal.keyword()
                                ),
                            ));
                        }
                    }
                }
            }
        }
        Check::SensorResponse { input, signal, within, .. } => {
            for (name, trace) in traces {
                let rows = &trace.rows;
                for t in 0..rows.len().saturating_sub(*within) {
                    let window = &rows[t..=t + within];
                    if window.iter().all(|r| r.input_true(input))
                        && !window.iter().any(|r| r.color(*signal) == Color::Green)
                    {
                        found.push(violation(
                            check,
                            name,
                            Some(t),
                            trace,
                            format!(
                                "`{input}` held from tick {t} but {} not GREEN within {within} ticks",
                                signal.keyword()
                            ),
                        ));
                        break;
                    }
                }
            }
        }
    }
    found
}
