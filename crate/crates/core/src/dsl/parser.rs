//! Recursive-descent parser for controller sources.
//!
//! ```text
//! program    := "controller" IDENT "{" input* state+ "}"
//! input      := "input" IDENT ":" ("bool" | "int") ";"
//! state      := ["initial"] "state" IDENT "{" output* transition* "}"
//! output     := "set" ("ns" | "ew") "=" ("RED" | "YELLOW" | "GREEN") ";"
//! transition := "when" expr "->" IDENT ";"
//! expr       := and ("or" and)*
//! and        := not ("and" not)*
//! not        := "not" not | cmp
//! cmp        := atom [("==" | "!=" | "<" | "<=" | ">" | ">=") atom]
//! atom       := INT | "true" | "false" | "elapsed" | IDENT | "(" expr ")"
//! ```
//!
//! Parsing stops at the first syntax error.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::Diagnostic;

/// Nesting limit for guard expressions; deeper input is rejected rather
/// than risking stack exhaustion.
const MAX_EXPR_DEPTH: usize = 128;

pub fn parse(source: &str) -> Result<FsmProgram, Vec<Diagnostic>> {
    let tokens = tokenize(source).map_err(|d| vec![d])?;
    let mut parser = Parser { tokens, pos: 0, depth: 0 };
    parser.program().map_err(|d| vec![d])
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        // the token stream always ends with Eof and `pos` never passes it
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let tok = self.peek().clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn unexpected(&self, expected: &[TokenKind]) -> Diagnostic {
        let tok = self.peek();
        let found = match &tok.kind {
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Int(n) => format!("integer `{n}`"),
            other => other.describe(),
        };
        let expected: Vec<String> = expected.iter().map(TokenKind::describe).collect();
        Diagnostic::error(tok.span, format!("expected {}, found {found}", expected.join(" or ")))
            .with_expected(expected)
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if self.at(&kind) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&[kind]))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                let span = self.advance().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.unexpected(&[TokenKind::Ident(String::new())])),
        }
    }

    fn program(&mut self) -> PResult<FsmProgram> {
        let span = self.expect(TokenKind::Controller)?.span;
        let name = self.ident()?;
        self.expect(TokenKind::LBrace)?;

        let mut inputs = Vec::new();
        while self.at(&TokenKind::Input) {
            self.advance();
            let name = self.ident()?;
            self.expect(TokenKind::Colon)?;
            let ty = match self.peek().kind {
                TokenKind::BoolTy => InputType::Bool,
                TokenKind::IntTy => InputType::Int,
                _ => return Err(self.unexpected(&[TokenKind::BoolTy, TokenKind::IntTy])),
            };
            self.advance();
            self.expect(TokenKind::Semi)?;
            inputs.push(InputDecl { name, ty });
        }

        let mut states = Vec::new();
        loop {
            match self.peek().kind {
                TokenKind::Initial | TokenKind::State => states.push(self.state()?),
                TokenKind::RBrace if !states.is_empty() => break,
                _ => {
                    let mut expected = vec![TokenKind::Initial, TokenKind::State];
                    if states.is_empty() && inputs.is_empty() {
                        expected.insert(0, TokenKind::Input);
                    }
                    if !states.is_empty() {
                        expected.push(TokenKind::RBrace);
                    }
                    return Err(self.unexpected(&expected));
                }
            }
        }
        self.expect(TokenKind::RBrace)?;
        if !self.at(&TokenKind::Eof) {
            return Err(self.unexpected(&[TokenKind::Eof]));
        }
        Ok(FsmProgram { name, inputs, states, span })
    }

    fn state(&mut self) -> PResult<StateDef> {
        let span = self.peek().span;
        let initial = self.at(&TokenKind::Initial);
        if initial {
            self.advance();
        }
        self.expect(TokenKind::State)?;
        let name = self.ident()?;
        self.expect(TokenKind::LBrace)?;

        let mut outputs = Vec::new();
        while self.at(&TokenKind::Set) {
            let span = self.advance().span;
            let signal = match self.peek().kind {
                TokenKind::Ns => Signal::Ns,
                TokenKind::Ew => Signal::Ew,
                _ => return Err(self.unexpected(&[TokenKind::Ns, TokenKind::Ew])),
            };
            self.advance();
            self.expect(TokenKind::Assign)?;
            let color = match self.peek().kind {
                TokenKind::Red => Color::Red,
                TokenKind::Yellow => Color::Yellow,
                TokenKind::Green => Color::Green,
                _ => return Err(self.unexpected(&[TokenKind::Red, TokenKind::Yellow, TokenKind::Green])),
            };
            self.advance();
            self.expect(TokenKind::Semi)?;
            outputs.push(OutputAssign { signal, color, span });
        }

        let mut transitions = Vec::new();
        while self.at(&TokenKind::When) {
            let span = self.advance().span;
            let guard = self.expr()?;
            self.expect(TokenKind::Arrow)?;
            let target = self.ident()?;
            self.expect(TokenKind::Semi)?;
            transitions.push(Transition { guard, target, span });
        }

        if !self.at(&TokenKind::RBrace) {
            let expected: &[TokenKind] = if transitions.is_empty() {
                &[TokenKind::Set, TokenKind::When, TokenKind::RBrace]
            } else {
                &[TokenKind::When, TokenKind::RBrace]
            };
            return Err(self.unexpected(expected));
        }
        self.advance();
        Ok(StateDef { name, initial, outputs, transitions, span })
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_EXPR_DEPTH {
            return Err(Diagnostic::error(self.peek().span, "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let mut lhs = self.and_expr()?;
        while self.at(&TokenKind::Or) {
            self.advance();
            let rhs = self.and_expr()?;
            let span = lhs.span();
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs), span);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.at(&TokenKind::And) {
            self.advance();
            let rhs = self.not_expr()?;
            let span = lhs.span();
            lhs = Expr::And(Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.at(&TokenKind::Not) {
            let span = self.advance().span;
            self.enter()?;
            let inner = self.not_expr()?;
            self.depth -= 1;
            return Ok(Expr::Not(Box::new(inner), span));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.atom()?;
        let op = match self.peek().kind {
            TokenKind::EqEq => CmpOp::Eq,
            TokenKind::NotEq => CmpOp::Ne,
            TokenKind::Lt => CmpOp::Lt,
            TokenKind::Le => CmpOp::Le,
            TokenKind::Gt => CmpOp::Gt,
            TokenKind::Ge => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.atom()?;
        let span = lhs.span();
        Ok(Expr::Cmp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span })
    }

    fn atom(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        let expr = match tok.kind {
            TokenKind::Int(n) => Expr::Int(n, tok.span),
            TokenKind::True => Expr::Bool(true, tok.span),
            TokenKind::False => Expr::Bool(false, tok.span),
            TokenKind::Elapsed => Expr::Elapsed(tok.span),
            TokenKind::Ident(name) => Expr::Var(Ident { name, span: tok.span }),
            TokenKind::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(inner);
            }
            _ => {
                return Err(self.unexpected(&[
                    TokenKind::Int(0),
                    TokenKind::True,
                    TokenKind::False,
                    TokenKind::Elapsed,
                    TokenKind::Ident(String::new()),
                    TokenKind::LParen,
                    TokenKind::Not,
                ]))
            }
        };
        self.advance();
        Ok(expr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("controller C { initial state S { } }").unwrap();
        assert_eq!(p.name.name, "C");
        assert_eq!(p.states.len(), 1);
        assert!(p.states[0].initial);
        assert_eq!(p.states[0].output(Signal::Ns), Color::Red);
        assert_eq!(p.states[0].output(Signal::Ew), Color::Red);
    }

    #[test]
    fn missing_state_name_points_after_keyword() {
        let diags = parse("controller C { state }").unwrap_err();
        assert_eq!(diags.len(), 1);
        let d = &diags[0];
        assert_eq!((d.line, d.column), (1, 22));
        assert_eq!(d.expected, vec!["identifier".to_string()]);
    }

    #[test]
    fn precedence_or_and_not() {
        let p = parse(
            "controller C { input a: bool; input b: bool; initial state S { when not a or a and b -> S; } }",
        )
        .unwrap();
        let guard = &p.states[0].transitions[0].guard;
        match guard {
            Expr::Or(l, r, _) => {
                assert!(matches!(**l, Expr::Not(..)));
                assert!(matches!(**r, Expr::And(..)));
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn deep_nesting_is_a_diagnostic() {
        let src = format!(
            "controller C {{ initial state S {{ when {}true{} -> S; }} }}",
            "(".repeat(5000),
            ")".repeat(5000)
        );
        let diags = parse(&src).unwrap_err();
        assert!(diags[0].message.contains("nested"));
        let src = format!("controller C {{ initial state S {{ when {}true -> S; }} }}", "not ".repeat(5000));
        assert!(parse(&src).is_err());
    }

    #[test]
    fn trailing_tokens_rejected() {
        let diags = parse("controller C { initial state S { } } extra").unwrap_err();
        assert_eq!((diags[0].line, diags[0].column), (1, 38));
    }
}
