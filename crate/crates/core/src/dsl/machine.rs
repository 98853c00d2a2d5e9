//! Moore-machine interpreter: outputs belong to states, the first true guard
//! in source order fires, and `elapsed` counts ticks spent in the current state.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::{check, Diagnostic, Severity};

/// Runtime value of an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
}

pub type InputAssignment = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("no value for input `{input}` at tick {tick}")]
    MissingInput { input: String, tick: usize },
    #[error("input `{input}` expects {expected} at tick {tick}")]
    InputType { input: String, expected: &'static str, tick: usize },
}

#[derive(Debug, Clone)]
enum Guard {
    Bool(bool),
    Int(i64),
    Input(usize),
    Elapsed,
    Cmp(CmpOp, Box<Guard>, Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

#[derive(Debug, Clone)]
struct CompiledState {
    name: String,
    ns: Color,
    ew: Color,
    transitions: Vec<(Guard, usize)>,
}

/// Current position of a running controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Runtime {
    pub state: usize,
    pub elapsed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outputs {
    pub ns: Color,
    pub ew: Color,
}

impl Outputs {
    pub fn get(&self, signal: Signal) -> Color {
        match signal {
            Signal::Ns => self.ns,
            Signal::Ew => self.ew,
        }
    }
}

/// A checked program lowered to index form.
#[derive(Debug, Clone)]
pub struct Machine {
    inputs: Vec<(String, InputType)>,
    states: Vec<CompiledState>,
    initial: usize,
}

fn lower(expr: &Expr, inputs: &HashMap<&str, usize>) -> Guard {
    match expr {
        Expr::Bool(b, _) => Guard::Bool(*b),
        Expr::Int(n, _) => Guard::Int(*n),
        // check() has rejected unknown identifiers
        Expr::Var(id) => Guard::Input(inputs[id.name.as_str()]),
        Expr::Elapsed(_) => Guard::Elapsed,
        Expr::Cmp { op, lhs, rhs, .. } => {
            Guard::Cmp(*op, Box::new(lower(lhs, inputs)), Box::new(lower(rhs, inputs)))
        }
        Expr::And(l, r, _) => Guard::And(Box::new(lower(l, inputs)), Box::new(lower(r, inputs))),
        Expr::Or(l, r, _) => Guard::Or(Box::new(lower(l, inputs)), Box::new(lower(r, inputs))),
        Expr::Not(e, _) => Guard::Not(Box::new(lower(e, inputs))),
    }
}

impl Machine {
    /// Checks and lowers `program`. Fails with the error diagnostics if any.
    pub fn compile(program: &FsmProgram) -> Result<Machine, Vec<Diagnostic>> {
        let errors: Vec<Diagnostic> =
            check(program).into_iter().filter(|d| d.severity == Severity::Error).collect();
        if !errors.is_empty() {
            return Err(errors);
        }
        let input_index: HashMap<&str, usize> =
            program.inputs.iter().enumerate().map(|(i, d)| (d.name.name.as_str(), i)).collect();
        let state_index: HashMap<&str, usize> =
            program.states.iter().enumerate().map(|(i, s)| (s.name.name.as_str(), i)).collect();
        let states = program
            .states
            .iter()
            .map(|s| CompiledState {
                name: s.name.name.clone(),
                ns: s.output(Signal::Ns),
                ew: s.output(Signal::Ew),
                transitions: s
                    .transitions
                    .iter()
                    .map(|t| (lower(&t.guard, &input_index), state_index[t.target.name.as_str()]))
                    .collect(),
            })
            .collect();
        let initial = program.states.iter().position(|s| s.initial).expect("checked: one initial state");
        Ok(Machine {
            inputs: program.inputs.iter().map(|d| (d.name.name.clone(), d.ty)).collect(),
            states,
            initial,
        })
    }

    pub fn start(&self) -> Runtime {
        Runtime { state: self.initial, elapsed: 0 }
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.states[state].name
    }

    pub fn outputs(&self, state: usize) -> Outputs {
        let s = &self.states[state];
        Outputs { ns: s.ns, ew: s.ew }
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|(n, _)| n.as_str())
    }

    fn bind(&self, inputs: &InputAssignment, tick: usize) -> Result<Vec<Value>, SimError> {
        self.inputs
            .iter()
            .map(|(name, ty)| {
                let value = inputs
                    .get(name)
                    .copied()
                    .ok_or_else(|| SimError::MissingInput { input: name.clone(), tick })?;
                match (ty, value) {
                    (InputType::Bool, Value::Bool(_)) | (InputType::Int, Value::Int(_)) => Ok(value),
                    _ => Err(SimError::InputType { input: name.clone(), expected: ty.keyword(), tick }),
                }
            })
            .collect()
    }

    fn eval_int(guard: &Guard, values: &[Value], elapsed: u64) -> i64 {
        match guard {
            Guard::Int(n) => *n,
            Guard::Elapsed => i64::try_from(elapsed).unwrap_or(i64::MAX),
            Guard::Input(i) => match values[*i] {
                Value::Int(n) => n,
                Value::Bool(b) => b as i64,
            },
            other => Self::eval_bool(other, values, elapsed) as i64,
        }
    }

    fn eval_bool(guard: &Guard, values: &[Value], elapsed: u64) -> bool {
        match guard {
            Guard::Bool(b) => *b,
            Guard::Input(i) => matches!(values[*i], Value::Bool(true)),
            Guard::Cmp(op, l, r) => op.apply(Self::eval_int(l, values, elapsed), Self::eval_int(r, values, elapsed)),
            Guard::And(l, r) => Self::eval_bool(l, values, elapsed) && Self::eval_bool(r, values, elapsed),
            Guard::Or(l, r) => Self::eval_bool(l, values, elapsed) || Self::eval_bool(r, values, elapsed),
            Guard::Not(e) => !Self::eval_bool(e, values, elapsed),
            Guard::Int(_) | Guard::Elapsed => false,
        }
    }

    /// One tick. Returns the next runtime and the outputs of the state it lands in.
    pub fn step(&self, runtime: Runtime, inputs: &InputAssignment) -> Result<(Runtime, Outputs), SimError> {
        self.step_at(runtime, inputs, 0)
    }

    fn step_at(&self, runtime: Runtime, inputs: &InputAssignment, tick: usize) -> Result<(Runtime, Outputs), SimError> {
        let values = self.bind(inputs, tick)?;
        let state = &self.states[runtime.state];
        let next = state
            .transitions
            .iter()
            .find(|(guard, _)| Self::eval_bool(guard, &values, runtime.elapsed))
            .map(|&(_, target)| Runtime { state: target, elapsed: 0 })
            .unwrap_or(Runtime { state: runtime.state, elapsed: runtime.elapsed.saturating_add(1) });
        Ok((next, self.outputs(next.state)))
    }

    /// Runs `ticks` ticks from the initial state.
    pub fn simulate(&self, scenario: &Scenario, ticks: usize) -> Result<SimTrace, SimError> {
        let mut rows = Vec::with_capacity(ticks);
        let mut runtime = self.start();
        let mut current = InputAssignment::new();
        let mut changes = scenario.changes.iter().peekable();
        for tick in 0..ticks {
            while let Some(change) = changes.next_if(|c| c.at <= tick) {
                current.extend(change.set.iter().map(|(k, v)| (k.clone(), *v)));
            }
            let (next, _) = self.step_at(runtime, &current, tick)?;
            let out = self.outputs(runtime.state);
            rows.push(TraceRow {
                tick,
                state: self.states[runtime.state].name.clone(),
                ns: out.ns,
                ew: out.ew,
                elapsed: runtime.elapsed,
                inputs: self.inputs.iter().map(|(n, _)| (n.clone(), current[n])).collect(),
            });
            runtime = next;
        }
        Ok(SimTrace { rows })
    }
}

/// Input change applied from tick `at` onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputChange {
    pub at: usize,
    pub set: InputAssignment,
}

/// Per-tick inputs, given as a list of changes. Ticks without a change
/// inherit the previous assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub changes: Vec<InputChange>,
}

impl Scenario {
    pub fn constant(set: InputAssignment) -> Self {
        let mut s = Scenario { changes: vec![InputChange { at: 0, set }] };
        s.normalize();
        s
    }

    /// Sorts changes by tick (stable for equal ticks).
    pub fn normalize(&mut self) {
        self.changes.sort_by_key(|c| c.at);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: usize,
    pub state: String,
    pub ns: Color,
    pub ew: Color,
    pub elapsed: u64,
    pub inputs: InputAssignment,
}

impl TraceRow {
    pub fn color(&self, signal: Signal) -> Color {
        match signal {
            Signal::Ns => self.ns,
            Signal::Ew => self.ew,
        }
    }

    pub fn input_true(&self, name: &str) -> bool {
        matches!(self.inputs.get(name), Some(Value::Bool(true)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `tick,state,ns,ew,elapsed` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick,state,ns,ew,elapsed\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.tick, r.state, r.ns, r.ew, r.elapsed);
        }
        out
    }
}
