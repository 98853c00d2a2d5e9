use super::ast::Span;
use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Controller,
    Input,
    Initial,
    State,
    Set,
    When,
    BoolTy,
    IntTy,
    True,
    False,
    And,
    Or,
    Not,
    Elapsed,
    Ns,
    Ew,
    Red,
    Yellow,
    Green,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Arrow,
    Eof,
}

impl TokenKind {
    /// How the token is written in source, for "expected ..." lists.
    pub fn describe(&self) -> String {
        let s = match self {
            TokenKind::Ident(_) => "identifier",
            TokenKind::Int(_) => "integer",
            TokenKind::Controller => "`controller`",
            TokenKind::Input => "`input`",
            TokenKind::Initial => "`initial`",
            TokenKind::State => "`state`",
            TokenKind::Set => "`set`",
            TokenKind::When => "`when`",
            TokenKind::BoolTy => "`bool`",
            TokenKind::IntTy => "`int`",
            TokenKind::True => "`true`",
            TokenKind::False => "`false`",
            TokenKind::And => "`and`",
            TokenKind::Or => "`or`",
            TokenKind::Not => "`not`",
            TokenKind::Elapsed => "`elapsed`",
            TokenKind::Ns => "`ns`",
            TokenKind::Ew => "`ew`",
            TokenKind::Red => "`RED`",
            TokenKind::Yellow => "`YELLOW`",
            TokenKind::Green => "`GREEN`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::Colon => "`:`",
            TokenKind::Semi => "`;`",
            TokenKind::Assign => "`=`",
            TokenKind::EqEq => "`==`",
            TokenKind::NotEq => "`!=`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::Arrow => "`->`",
            TokenKind::Eof => "end of input",
        };
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "controller" => TokenKind::Controller,
        "input" => TokenKind::Input,
        "initial" => TokenKind::Initial,
        "state" => TokenKind::State,
        "set" => TokenKind::Set,
        "when" => TokenKind::When,
        "bool" => TokenKind::BoolTy,
        "int" => TokenKind::IntTy,
        "true" => TokenKind::True,
        "false" => TokenKind::False,
        "and" => TokenKind::And,
        "or" => TokenKind::Or,
        "not" => TokenKind::Not,
        "elapsed" => TokenKind::Elapsed,
        "ns" => TokenKind::Ns,
        "ew" => TokenKind::Ew,
        "RED" => TokenKind::Red,
        "YELLOW" => TokenKind::Yellow,
        "GREEN" => TokenKind::Green,
        _ => return None,
    })
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span::new(self.line, self.column)
    }
}

/// Splits source text into tokens. Stops at the first lexical error.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor { chars: source.chars().peekable(), line: 1, column: 1 };
    let mut tokens = Vec::new();
    loop {
        // whitespace and `//` comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') => {
                    let span = cur.here();
                    cur.bump();
                    if cur.peek() == Some('/') {
                        while let Some(c) = cur.peek() {
                            if c == '\n' {
                                break;
                            }
                            cur.bump();
                        }
                    } else {
                        return Err(Diagnostic::error(span, "unexpected character `/`"));
                    }
                }
                _ => break,
            }
        }

        let span = cur.here();
        let Some(c) = cur.bump() else {
            tokens.push(Token { kind: TokenKind::Eof, span });
            return Ok(tokens);
        };
        let kind = match c {
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ':' => TokenKind::Colon,
            ';' => TokenKind::Semi,
            '=' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                    TokenKind::EqEq
                } else {
                    TokenKind::Assign
                }
            }
            '!' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                    TokenKind::NotEq
                } else {
                    return Err(Diagnostic::error(span, "unexpected character `!` (use `not`)"));
                }
            }
            '<' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                    TokenKind::Le
                } else {
                    TokenKind::Lt
                }
            }
            '>' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                    TokenKind::Ge
                } else {
                    TokenKind::Gt
                }
            }
            '-' => {
                if cur.peek() == Some('>') {
                    cur.bump();
                    TokenKind::Arrow
                } else {
                    return Err(Diagnostic::error(span, "unexpected character `-`"));
                }
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::from(c);
                while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    cur.bump();
                }
                match digits.parse::<i64>() {
                    Ok(n) => TokenKind::Int(n),
                    Err(_) => {
                        return Err(Diagnostic::error(span, format!("integer literal `{digits}` is too large")))
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::from(c);
                while let Some(d) = cur.peek().filter(|d| d.is_ascii_alphanumeric() || *d == '_') {
                    word.push(d);
                    cur.bump();
                }
                keyword(&word).unwrap_or(TokenKind::Ident(word))
            }
            other => {
                return Err(Diagnostic::error(span, format!("unexpected character `{}`", other.escape_debug())));
            }
        };
        tokens.push(Token { kind, span });
    }
}
