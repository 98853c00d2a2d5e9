//! Static checks run before a controller may be simulated or graded.

use std::collections::{HashMap, HashSet, VecDeque};

use super::ast::*;
use super::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Bool,
    Int,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Bool => "bool",
            Ty::Int => "int",
        }
    }
}

struct Checker<'a> {
    inputs: HashMap<&'a str, InputType>,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    /// Infers the type of `expr`, reporting errors. `None` means the
    /// subexpression is already broken and should not cascade.
    fn infer(&mut self, expr: &Expr) -> Option<Ty> {
        match expr {
            Expr::Bool(..) => Some(Ty::Bool),
            Expr::Int(..) | Expr::Elapsed(_) => Some(Ty::Int),
            Expr::Var(id) => match self.inputs.get(id.name.as_str()) {
                Some(InputType::Bool) => Some(Ty::Bool),
                Some(InputType::Int) => Some(Ty::Int),
                None => {
                    self.diags.push(Diagnostic::error(id.span, format!("unknown identifier `{}`", id.name)));
                    None
                }
            },
            Expr::Cmp { op, lhs, rhs, .. } => {
                let l = self.infer(lhs);
                let r = self.infer(rhs);
                for (side, ty) in [(lhs, l), (rhs, r)] {
                    if ty == Some(Ty::Bool) {
                        self.diags.push(Diagnostic::error(
                            side.span(),
                            format!("`{}` compares integers, found bool", op.symbol()),
                        ));
                    }
                }
                Some(Ty::Bool)
            }
            Expr::And(l, r, _) | Expr::Or(l, r, _) => {
                let word = if matches!(expr, Expr::And(..)) { "and" } else { "or" };
                for side in [l, r] {
                    self.expect_bool(side, word);
                }
                Some(Ty::Bool)
            }
            Expr::Not(e, _) => {
                self.expect_bool(e, "not");
                Some(Ty::Bool)
            }
        }
    }

    fn expect_bool(&mut self, expr: &Expr, context: &str) {
        if let Some(ty @ Ty::Int) = self.infer(expr) {
            self.diags.push(Diagnostic::error(
                expr.span(),
                format!("`{context}` expects bool, found {}", ty.name()),
            ));
        }
    }
}

/// Reports errors (which block simulation) and warnings (which do not).
pub fn check(program: &FsmProgram) -> Vec<Diagnostic> {
    let mut ck = Checker { inputs: HashMap::new(), diags: Vec::new() };

    for input in &program.inputs {
        if ck.inputs.insert(input.name.name.as_str(), input.ty).is_some() {
            ck.diags.push(Diagnostic::error(
                input.name.span,
                format!("input `{}` declared more than once", input.name.name),
            ));
        }
    }

    // first definition wins for name lookups
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (i, state) in program.states.iter().enumerate() {
        if first.contains_key(state.name.name.as_str()) {
            ck.diags.push(Diagnostic::error(
                state.name.span,
                format!("state `{}` defined more than once", state.name.name),
            ));
        } else {
            first.insert(state.name.name.as_str(), i);
        }
    }

    let initials: Vec<&StateDef> = program.states.iter().filter(|s| s.initial).collect();
    match initials.as_slice() {
        [] => ck.diags.push(Diagnostic::error(program.name.span, "no state is marked `initial`")),
        [_] => {}
        [_, rest @ ..] => {
            for s in rest {
                ck.diags.push(Diagnostic::error(
                    s.span,
                    format!("state `{}` is a second `initial` state", s.name.name),
                ));
            }
        }
    }

    for state in &program.states {
        let mut seen = HashSet::new();
        for o in &state.outputs {
            if !seen.insert(o.signal) {
                ck.diags.push(Diagnostic::error(
                    o.span,
                    format!("signal `{}` assigned more than once in state `{}`", o.signal.keyword(), state.name.name),
                ));
            }
        }
        for t in &state.transitions {
            if !first.contains_key(t.target.name.as_str()) {
                ck.diags.push(Diagnostic::error(
                    t.target.span,
                    format!("transition to unknown state `{}`", t.target.name),
                ));
            }
            ck.expect_bool(&t.guard, "when");
        }
    }

    // Warnings: unreachable states and dead ends.
    if let Some(init) = initials.first() {
        let start = first[init.name.name.as_str()];
        let mut reached = vec![false; program.states.len()];
        let mut queue = VecDeque::from([start]);
        reached[start] = true;
        while let Some(i) = queue.pop_front() {
            for t in &program.states[i].transitions {
                if let Some(&j) = first.get(t.target.name.as_str()) {
                    if !reached[j] {
                        reached[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        for (i, state) in program.states.iter().enumerate() {
            if !reached[i] && first[state.name.name.as_str()] == i {
                ck.diags.push(Diagnostic::warning(
                    state.name.span,
                    format!("state `{}` is unreachable from the initial state", state.name.name),
                ));
            }
        }
    }
    // A state with no transitions at all is an unintended dead end unless it
    // is the whole machine. An explicit self-loop marks an intended absorbing state.
    if program.states.len() > 1 {
        for state in &program.states {
            if state.transitions.is_empty() {
                ck.diags.push(Diagnostic::warning(
                    state.name.span,
                    format!(
                        "state `{}` has no outgoing transitions; add `when true -> {};` if it is meant to absorb",
                        state.name.name, state.name.name
                    ),
                ));
            }
        }
    }

    ck.diags.sort_by_key(|d| (d.line, d.column));
    ck.diags
}
