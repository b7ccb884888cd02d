//! Expression AST and recursive-descent parser for user-supplied payoffs.
//!
//! Grammar (standard precedence, left associativity for binary operators
//! of equal precedence; `^` binds tighter than unary minus):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?            exponent must be constant
//! atom   := number | variable | func "(" expr ")" | "(" expr ")"
//! func   := sin | cos | exp | log
//! ```
//!
//! Variables are `x1..xm` and `y1..yn`; anything else is rejected at
//! parse time. Exponents are folded to an `f64` after checking the
//! subtree is variable-free, so `x1^(1+1)` and `x1^2` parse to the same
//! tree.

use std::fmt;
use thiserror::Error;

/// Which side of the game a variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarSide {
    X,
    Y,
}

/// Expression tree. `Pow` keeps its exponent as a plain constant.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based index into the x- or y-block.
    Var(VarSide, usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected {expected} at position {pos}, found '{found}'")]
    Unexpected {
        expected: &'static str,
        found: String,
        pos: usize,
    },
    #[error("malformed number '{text}' at position {pos}")]
    MalformedNumber { text: String, pos: usize },
    #[error("undeclared variable {name} at position {pos}")]
    UndeclaredVariable { name: String, pos: usize },
    #[error("unknown function '{name}' at position {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("exponent at position {pos} must be a constant expression")]
    NonConstantExponent { pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Number(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Plus => write!(f, "+"),
            Token::Minus => write!(f, "-"),
            Token::Star => write!(f, "*"),
            Token::Slash => write!(f, "/"),
            Token::Caret => write!(f, "^"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
        }
    }
}

fn tokenize(source: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '+' => {
                tokens.push((Token::Plus, pos));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, pos));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, pos));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, pos));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, pos));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, pos));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, pos));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| ParseError::MalformedNumber {
                        text: text.clone(),
                        pos: start,
                    })?;
                tokens.push((Token::Number(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push((Token::Ident(chars[start..i].iter().collect()), start));
            }
            other => return Err(ParseError::UnexpectedChar { ch: other, pos }),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    cursor: usize,
    m: usize,
    n: usize,
    source_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Token, usize)> {
        self.tokens.get(self.cursor)
    }

    fn bump(&mut self) -> Option<&(Token, usize)> {
        let t = self.tokens.get(self.cursor);
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, expected: &'static str) -> Result<(), ParseError> {
        match self.bump() {
            Some((t, _)) if *t == want => Ok(()),
            Some((t, pos)) => Err(ParseError::Unexpected {
                expected,
                found: t.to_string(),
                pos: *pos,
            }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some((tok, _)) = self.peek() {
            match tok {
                Token::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Token::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((tok, _)) = self.peek() {
            match tok {
                Token::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Token::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some((Token::Minus, _)) = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some((Token::Caret, caret_pos)) = self.peek().map(|(t, p)| (t.clone(), *p)) {
            let _ = caret_pos;
            self.bump();
            let exp_pos = self.peek().map(|(_, p)| *p).unwrap_or(self.source_len);
            let exponent_tree = self.unary()?;
            let k = fold_constant(&exponent_tree)
                .ok_or(ParseError::NonConstantExponent { pos: exp_pos })?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump().cloned() {
            Some((Token::Number(v), _)) => Ok(Expr::Const(v)),
            Some((Token::Ident(name), pos)) => {
                if let Some((Token::LParen, _)) = self.peek() {
                    self.bump();
                    let inner = self.expr()?;
                    self.expect(Token::RParen, "')'")?;
                    let arg = Box::new(inner);
                    match name.as_str() {
                        "sin" => Ok(Expr::Sin(arg)),
                        "cos" => Ok(Expr::Cos(arg)),
                        "exp" => Ok(Expr::Exp(arg)),
                        "log" => Ok(Expr::Log(arg)),
                        _ => Err(ParseError::UnknownFunction { name, pos }),
                    }
                } else {
                    self.variable(&name, pos)
                }
            }
            Some((Token::LParen, _)) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Some((t, pos)) => Err(ParseError::Unexpected {
                expected: "a value",
                found: t.to_string(),
                pos,
            }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }

    fn variable(&mut self, name: &str, pos: usize) -> Result<Expr, ParseError> {
        let undeclared = || ParseError::UndeclaredVariable {
            name: name.to_string(),
            pos,
        };
        let mut chars = name.chars();
        let side = match chars.next() {
            Some('x') => VarSide::X,
            Some('y') => VarSide::Y,
            _ => return Err(undeclared()),
        };
        let digits: String = chars.collect();
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(undeclared());
        }
        let index: usize = digits.parse().map_err(|_| undeclared())?;
        let limit = match side {
            VarSide::X => self.m,
            VarSide::Y => self.n,
        };
        if index < 1 || index > limit {
            return Err(undeclared());
        }
        Ok(Expr::Var(side, index - 1))
    }
}

/// Evaluates a variable-free subtree, or `None` if it mentions a variable
/// or fails to evaluate.
fn fold_constant(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(v) => Some(*v),
        Expr::Var(..) => None,
        Expr::Neg(a) => fold_constant(a).map(|v| -v),
        Expr::Add(a, b) => Some(fold_constant(a)? + fold_constant(b)?),
        Expr::Sub(a, b) => Some(fold_constant(a)? - fold_constant(b)?),
        Expr::Mul(a, b) => Some(fold_constant(a)? * fold_constant(b)?),
        Expr::Div(a, b) => {
            let d = fold_constant(b)?;
            if d == 0.0 {
                None
            } else {
                Some(fold_constant(a)? / d)
            }
        }
        Expr::Pow(a, k) => Some(fold_constant(a)?.powf(*k)),
        Expr::Sin(a) => fold_constant(a).map(f64::sin),
        Expr::Cos(a) => fold_constant(a).map(f64::cos),
        Expr::Exp(a) => fold_constant(a).map(f64::exp),
        Expr::Log(a) => {
            let v = fold_constant(a)?;
            if v > 0.0 {
                Some(v.ln())
            } else {
                None
            }
        }
    }
}

/// Parses `source` over variables `x1..xm`, `y1..yn`. Both sides of the
/// game must be non-empty.
pub fn parse(source: &str, m: usize, n: usize) -> Result<Expr, ParseError> {
    assert!(m >= 1 && n >= 1, "need at least one variable per side");
    if source.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens: &tokens,
        cursor: 0,
        m,
        n,
        source_len: source.len(),
    };
    let tree = parser.expr()?;
    if let Some((t, pos)) = parser.peek() {
        return Err(ParseError::Unexpected {
            expected: "end of input",
            found: t.to_string(),
            pos: *pos,
        });
    }
    Ok(tree)
}

// Precedence levels used by both parser shape and printer.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => PREC_ADD,
        Expr::Mul(..) | Expr::Div(..) => PREC_MUL,
        Expr::Neg(..) => PREC_NEG,
        Expr::Pow(..) => PREC_POW,
        _ => PREC_ATOM,
    }
}

fn write_expr(e: &Expr, min_prec: u8, out: &mut String) {
    let prec = precedence(e);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Const(v) => out.push_str(&format!("{v}")),
        Expr::Var(VarSide::X, i) => out.push_str(&format!("x{}", i + 1)),
        Expr::Var(VarSide::Y, i) => out.push_str(&format!("y{}", i + 1)),
        Expr::Neg(a) => {
            out.push('-');
            write_expr(a, PREC_NEG, out);
        }
        Expr::Add(a, b) => {
            write_expr(a, PREC_ADD, out);
            out.push_str(" + ");
            write_expr(b, PREC_ADD + 1, out);
        }
        Expr::Sub(a, b) => {
            write_expr(a, PREC_ADD, out);
            out.push_str(" - ");
            write_expr(b, PREC_ADD + 1, out);
        }
        Expr::Mul(a, b) => {
            write_expr(a, PREC_MUL, out);
            out.push('*');
            write_expr(b, PREC_MUL + 1, out);
        }
        Expr::Div(a, b) => {
            write_expr(a, PREC_MUL, out);
            out.push('/');
            write_expr(b, PREC_MUL + 1, out);
        }
        Expr::Pow(a, k) => {
            write_expr(a, PREC_ATOM, out);
            out.push('^');
            out.push_str(&format!("{k}"));
        }
        Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Log(a) => {
            let name = match e {
                Expr::Sin(_) => "sin",
                Expr::Cos(_) => "cos",
                Expr::Exp(_) => "exp",
                _ => "log",
            };
            out.push_str(name);
            out.push('(');
            write_expr(a, PREC_ADD, out);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(self, 0, &mut s);
        f.write_str(&s)
    }
}
