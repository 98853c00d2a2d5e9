use serde::{Deserialize, Serialize};

/// 1-based source position of the first character of a construct.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub const fn new(line: u32, column: u32) -> Self {
        Span { line, column }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputType {
    Bool,
    Int,
}

impl InputType {
    pub fn keyword(self) -> &'static str {
        match self {
            InputType::Bool => "bool",
            InputType::Int => "int",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Ns,
    Ew,
}

impl Signal {
    pub const ALL: [Signal; 2] = [Signal::Ns, Signal::Ew];

    pub fn keyword(self) -> &'static str {
        match self {
            Signal::Ns => "ns",
            Signal::Ew => "ew",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Color {
    #[default]
    Red,
    Yellow,
    Green,
}

impl Color {
    pub fn keyword(self) -> &'static str {
        match self {
            Color::Red => "RED",
            Color::Yellow => "YELLOW",
            Color::Green => "GREEN",
        }
    }
}

impl std::fmt::Display for Color {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn apply(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// Guard expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Bool(bool, Span),
    Int(i64, Span),
    Var(Ident),
    /// Ticks spent in the current state.
    Elapsed(Span),
    Cmp {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    And(Box<Expr>, Box<Expr>, Span),
    Or(Box<Expr>, Box<Expr>, Span),
    Not(Box<Expr>, Span),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Bool(_, s) | Expr::Int(_, s) | Expr::Elapsed(s) => *s,
            Expr::Var(id) => id.span,
            Expr::Cmp { span, .. } => *span,
            Expr::And(_, _, s) | Expr::Or(_, _, s) | Expr::Not(_, s) => *s,
        }
    }

    fn clear_spans(&mut self) {
        match self {
            Expr::Bool(_, s) | Expr::Int(_, s) | Expr::Elapsed(s) => *s = Span::default(),
            Expr::Var(id) => id.span = Span::default(),
            Expr::Cmp { lhs, rhs, span, .. } => {
                *span = Span::default();
                lhs.clear_spans();
                rhs.clear_spans();
            }
            Expr::And(l, r, s) | Expr::Or(l, r, s) => {
                *s = Span::default();
                l.clear_spans();
                r.clear_spans();
            }
            Expr::Not(e, s) => {
                *s = Span::default();
                e.clear_spans();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDecl {
    pub name: Ident,
    pub ty: InputType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputAssign {
    pub signal: Signal,
    pub color: Color,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub guard: Expr,
    pub target: Ident,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDef {
    pub name: Ident,
    pub initial: bool,
    pub outputs: Vec<OutputAssign>,
    pub transitions: Vec<Transition>,
    pub span: Span,
}

impl StateDef {
    /// Color driven on `signal`; unassigned signals are RED.
    pub fn output(&self, signal: Signal) -> Color {
        self.outputs.iter().find(|o| o.signal == signal).map(|o| o.color).unwrap_or_default()
    }
}

/// Parsed controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmProgram {
    pub name: Ident,
    pub inputs: Vec<InputDecl>,
    pub states: Vec<StateDef>,
    pub span: Span,
}

impl FsmProgram {
    /// The first state marked `initial`.
    pub fn initial(&self) -> Option<&StateDef> {
        self.states.iter().find(|s| s.initial)
    }

    pub fn state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name.name == name)
    }

    /// Copy with every source position zeroed, for structural comparison.
    pub fn without_spans(&self) -> FsmProgram {
        let mut p = self.clone();
        p.span = Span::default();
        p.name.span = Span::default();
        for input in &mut p.inputs {
            input.name.span = Span::default();
        }
        for state in &mut p.states {
            state.span = Span::default();
            state.name.span = Span::default();
            for o in &mut state.outputs {
                o.span = Span::default();
            }
            for t in &mut state.transitions {
                t.span = Span::default();
                t.target.span = Span::default();
                t.guard.clear_spans();
            }
        }
        p
    }
}
