//! Traffic-light controller language.
//!
//! Source files (`.tl`) describe a Moore machine driving two signals, `ns`
//! and `ew`. [`parse`] turns text into an [`FsmProgram`], [`check`] reports
//! semantic errors and warnings, [`Machine`] runs the program tick by tick and
//! [`grade`] scores it against a [`Rubric`].

mod ast;
mod check;
mod grade;
mod lexer;
mod machine;
mod parser;
mod printer;

use serde::{Deserialize, Serialize};

pub use ast::{CmpOp, Color, Expr, FsmProgram, Ident, InputDecl, InputType, OutputAssign, Signal, Span, StateDef, Transition};
pub use check::check;
pub use grade::{conflicting, grade, grade_machine, Check, GradeReport, Rubric, ScenarioSpec, Violation};
pub use machine::{InputAssignment, InputChange, Machine, Outputs, Runtime, Scenario, SimError, SimTrace, TraceRow, Value};
pub use parser::parse;
pub use printer::{expr_to_string, pretty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: u32,
    pub column: u32,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<String>,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, line: span.line, column: span.column, message: message.into(), expected: Vec::new() }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, ..Diagnostic::error(span, message) }
    }

    pub fn with_expected(mut self, expected: Vec<String>) -> Self {
        self.expected = expected;
        self
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Parses and checks in one go. Returns every diagnostic; `Ok` only when none is an error.
pub fn compile(source: &str) -> Result<(FsmProgram, Vec<Diagnostic>), Vec<Diagnostic>> {
    let program = parse(source)?;
    let diags = check(&program);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        Err(diags)
    } else {
        Ok((program, diags))
    }
}

/// Reference solution for the controller task.
pub const REFERENCE_CONTROLLER: &str = include_str!("../../corpus/valid/reference.tl");
