//! Recursive-descent parser for the driver and scalar-function grammar.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := NUMBER | "t" | "y" | "z" IDX? | "norm(z)" | "abs(" expr ")"
//!         | "max(" expr "," expr ")" | "min(" expr "," expr ")"
//!         | "-" factor | "(" expr ")"
//! ```

use super::expr::Expr;
use super::DslError;

/// Which variables a parse accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarSet {
    /// `t`, `y`, `z1..zd`, `norm(z)`; bare `z` only when `dim_z == 1`.
    Generator { dim_z: usize },
    /// A function of one real argument, spelled `y` or `x`.
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'/' => Some(Tok::Slash),
            b'*' => {
                if bytes.get(i + 1) == Some(&b'*') {
                    return Err(DslError::syntax(start, "operator '**' is not part of the grammar"));
                }
                Some(Tok::Star)
            }
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| DslError::syntax(start, format!("malformed number '{text}'")))?;
            out.push(Token { tok: Tok::Num(value), offset: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), offset: start });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(DslError::syntax(start, format!("unexpected character '{ch}'")));
    }
    out.push(Token { tok: Tok::Eof, offset: src.len() });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    vars: VarSet,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), DslError> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            Err(DslError::syntax(t.offset, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, DslError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Minus => Ok(Expr::Neg(Box::new(self.factor()?))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(&name, t.offset),
            Tok::Eof => Err(DslError::syntax(t.offset, "unexpected end of input")),
            _ => Err(DslError::syntax(t.offset, "expected a number, variable or function")),
        }
    }

    fn ident(&mut self, name: &str, offset: usize) -> Result<Expr, DslError> {
        match name {
            "abs" => {
                self.expect(Tok::LParen, "'(' after abs")?;
                let a = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::Abs(Box::new(a)))
            }
            "max" | "min" => {
                self.expect(Tok::LParen, "'('")?;
                let a = self.expr()?;
                self.expect(Tok::Comma, "','")?;
                let b = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(if name == "max" {
                    Expr::Max(Box::new(a), Box::new(b))
                } else {
                    Expr::Min(Box::new(a), Box::new(b))
                })
            }
            "norm" => {
                if !matches!(self.vars, VarSet::Generator { .. }) {
                    return Err(DslError::unknown_variable(offset, name));
                }
                self.expect(Tok::LParen, "'(' after norm")?;
                let arg = self.bump();
                if arg.tok != Tok::Ident("z".into()) {
                    return Err(DslError::syntax(arg.offset, "norm takes the bare vector z"));
                }
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::NormZ)
            }
            _ => self.variable(name, offset),
        }
    }

    fn variable(&mut self, name: &str, offset: usize) -> Result<Expr, DslError> {
        match self.vars {
            VarSet::Scalar => match name {
                "y" | "x" => Ok(Expr::Y),
                _ => Err(DslError::unknown_variable(offset, name)),
            },
            VarSet::Generator { dim_z } => match name {
                "t" => Ok(Expr::T),
                "y" => Ok(Expr::Y),
                "z" if dim_z == 1 => Ok(Expr::Z(0)),
                _ => {
                    let idx = name
                        .strip_prefix('z')
                        .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
                        .and_then(|rest| rest.parse::<usize>().ok());
                    match idx {
                        Some(k) if k >= 1 && k <= dim_z => Ok(Expr::Z(k - 1)),
                        _ => Err(DslError::unknown_variable(offset, name)),
                    }
                }
            },
        }
    }
}

/// Parses `src` into an expression tree without semantic validation.
pub fn parse_expr(src: &str, vars: VarSet) -> Result<Expr, DslError> {
    if src.trim().is_empty() {
        return Err(DslError::syntax(0, "empty expression"));
    }
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0, vars };
    let e = p.expr()?;
    let rest = p.peek();
    if rest.tok != Tok::Eof {
        return Err(DslError::syntax(rest.offset, "unexpected trailing input"));
    }
    Ok(e)
}
