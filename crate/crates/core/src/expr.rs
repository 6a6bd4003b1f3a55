//! A small expression language for defining functions on the domain.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | 'pi' | 'e' | x1..x3 | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `abs sin cos exp log sqrt step sign` (one argument) and
//! `min max` (two). `step(x)` is 0 for `x < 0` and 1 otherwise; `sign(0)` is 0.

use std::fmt;

use thiserror::Error;

/// Nesting limit; deeper input is rejected instead of exhausting the stack.
pub const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Number(f64),
    Ident,
    Op(char),
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("malformed number '{0}'")]
    BadNumber(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected token '{0}'")]
    UnexpectedToken(String),
    #[error("expected ')'")]
    Unbalanced,
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("{name} takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("variable x{index} exceeds dimension {dimension}")]
    VariableOutOfRange { index: usize, dimension: usize },
    #[error("expression nested deeper than {MAX_DEPTH}")]
    TooDeep,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalErrorKind {
    #[error("logarithm of a nonpositive number")]
    LogDomain,
    #[error("square root of a negative number")]
    SqrtDomain,
    #[error("division by zero")]
    DivisionByZero,
    #[error("power is undefined")]
    PowDomain,
    #[error("result is not finite")]
    NonFinite,
    #[error("no value for variable x{0}")]
    MissingVariable(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("evaluation error in '{subexpr}': {kind}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub subexpr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Step,
    Sign,
    Min,
    Max,
}

impl Func {
    const ALL: [Func; 10] = [
        Func::Abs,
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Step,
        Func::Sign,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Step => "step",
            Func::Sign => "sign",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Number(f64),
    Pi,
    Euler,
    /// Zero-based variable index: `x1` is `Var(0)`.
    Var(usize),
    Neg(Box<Ast>),
    Binary(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Vec<Ast>),
}

/// Fully parenthesized, so printing and re-parsing is stable.
impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Number(v) => write!(f, "{v}"),
            Ast::Pi => write!(f, "pi"),
            Ast::Euler => write!(f, "e"),
            Ast::Var(i) => write!(f, "x{}", i + 1),
            Ast::Neg(a) => write!(f, "(-{a})"),
            Ast::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Ast::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Splits `src` into tokens carrying byte offsets.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when digits follow
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
                let lexeme = &src[start..i];
                let v = lexeme.parse::<f64>().map_err(|_| ParseError {
                    kind: ParseErrorKind::BadNumber(lexeme.to_string()),
                    offset: start,
                })?;
                if !v.is_finite() {
                    return Err(ParseError { kind: ParseErrorKind::BadNumber(lexeme.to_string()), offset: start });
                }
                tokens.push(Token { kind: TokenKind::Number(v), lexeme: lexeme.to_string(), offset: start });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token { kind: TokenKind::Ident, lexeme: src[start..i].to_string(), offset: start });
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                tokens.push(Token { kind: TokenKind::Op(c as char), lexeme: (c as char).to_string(), offset: start })
            }
            b'(' => tokens.push(Token { kind: TokenKind::LParen, lexeme: "(".into(), offset: start }),
            b')' => tokens.push(Token { kind: TokenKind::RParen, lexeme: ")".into(), offset: start }),
            b',' => tokens.push(Token { kind: TokenKind::Comma, lexeme: ",".into(), offset: start }),
            _ => {
                let ch = src[start..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError { kind: ParseErrorKind::UnexpectedChar(ch), offset: start });
            }
        }
        i += 1;
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: usize,
    dimension: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { kind, offset: self.offset() }
    }

    fn descend(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error(ParseErrorKind::TooDeep))
        } else {
            Ok(())
        }
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { kind: TokenKind::Op(c), .. }) if ops.contains(c) => {
                self.pos += 1;
                Some(*c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Ast::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Ast::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        self.descend()?;
        let out = if self.eat_op(&['-']).is_some() {
            Ast::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(out)
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Ast::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::RParen, .. }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(ParseErrorKind::Unbalanced)),
        }
    }

    fn primary(&mut self) -> Result<Ast, ParseError> {
        let tok = self.peek().ok_or_else(|| self.error(ParseErrorKind::UnexpectedEnd))?;
        match &tok.kind {
            TokenKind::Number(v) => {
                self.pos += 1;
                Ok(Ast::Number(*v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                self.descend()?;
                let inner = self.expr()?;
                self.expect_close()?;
                self.depth -= 1;
                Ok(inner)
            }
            TokenKind::Ident => {
                self.pos += 1;
                let name = tok.lexeme.as_str();
                let is_call = matches!(self.peek(), Some(Token { kind: TokenKind::LParen, .. }));
                if is_call {
                    let func = Func::lookup(name).ok_or(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                        offset: tok.offset,
                    })?;
                    self.pos += 1;
                    self.descend()?;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Token { kind: TokenKind::Comma, .. })) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect_close()?;
                    self.depth -= 1;
                    if args.len() != func.arity() {
                        return Err(ParseError {
                            kind: ParseErrorKind::Arity { name: name.to_string(), expected: func.arity(), got: args.len() },
                            offset: tok.offset,
                        });
                    }
                    return Ok(Ast::Call(func, args));
                }
                match name {
                    "pi" => Ok(Ast::Pi),
                    "e" => Ok(Ast::Euler),
                    _ => self.variable(tok),
                }
            }
            _ => Err(self.error(ParseErrorKind::UnexpectedToken(tok.lexeme.clone()))),
        }
    }

    fn variable(&self, tok: &Token) -> Result<Ast, ParseError> {
        let unknown = || ParseError { kind: ParseErrorKind::UnknownIdentifier(tok.lexeme.clone()), offset: tok.offset };
        let digits = tok.lexeme.strip_prefix('x').ok_or_else(unknown)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(unknown());
        }
        let index: usize = digits.parse().map_err(|_| unknown())?;
        if index > self.dimension {
            return Err(ParseError {
                kind: ParseErrorKind::VariableOutOfRange { index, dimension: self.dimension },
                offset: tok.offset,
            });
        }
        Ok(Ast::Var(index - 1))
    }
}

/// Parses `source` with variables `x1..x{dimension}`.
pub fn parse(source: &str, dimension: usize) -> Result<Ast, ParseError> {
    let tokens = tokenize(source)?;
    if tokens.is_empty() {
        return Err(ParseError { kind: ParseErrorKind::Empty, offset: 0 });
    }
    let mut parser = Parser { tokens: &tokens, pos: 0, end: source.len(), dimension, depth: 0 };
    let ast = parser.expr()?;
    if let Some(tok) = parser.peek() {
        let kind = match tok.kind {
            TokenKind::RParen => ParseErrorKind::UnexpectedToken(")".into()),
            _ => ParseErrorKind::UnexpectedToken(tok.lexeme.clone()),
        };
        return Err(ParseError { kind, offset: tok.offset });
    }
    Ok(ast)
}

fn fail(kind: EvalErrorKind, node: &Ast) -> EvalError {
    EvalError { kind, subexpr: node.to_string() }
}

fn finite(v: f64, node: &Ast) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fail(EvalErrorKind::NonFinite, node))
    }
}

/// Evaluates `ast` at `point` (`point[0]` is `x1`).
pub fn eval(ast: &Ast, point: &[f64]) -> Result<f64, EvalError> {
    match ast {
        Ast::Number(v) => Ok(*v),
        Ast::Pi => Ok(std::f64::consts::PI),
        Ast::Euler => Ok(std::f64::consts::E),
        Ast::Var(i) => point.get(*i).copied().ok_or_else(|| fail(EvalErrorKind::MissingVariable(i + 1), ast)),
        Ast::Neg(a) => Ok(-eval(a, point)?),
        Ast::Binary(op, a, b) => {
            let x = eval(a, point)?;
            let y = eval(b, point)?;
            let v = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(fail(EvalErrorKind::DivisionByZero, ast));
                    }
                    x / y
                }
                BinOp::Pow => {
                    let v = x.powf(y);
                    if v.is_nan() {
                        return Err(fail(EvalErrorKind::PowDomain, ast));
                    }
                    v
                }
            };
            finite(v, ast)
        }
        Ast::Call(func, args) => {
            let x = eval(&args[0], point)?;
            let v = match func {
                Func::Abs => x.abs(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(fail(EvalErrorKind::LogDomain, ast));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(fail(EvalErrorKind::SqrtDomain, ast));
                    }
                    x.sqrt()
                }
                Func::Step => {
                    if x < 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
                Func::Sign => {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                Func::Min => x.min(eval(&args[1], point)?),
                Func::Max => x.max(eval(&args[1], point)?),
            };
            finite(v, ast)
        }
    }
}

/// A parsed expression together with its source and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    dimension: usize,
    ast: Ast,
}

impl Expr {
    pub fn parse(source: &str, dimension: usize) -> Result<Self, ParseError> {
        Ok(Self { source: source.to_string(), dimension, ast: parse(source, dimension)? })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        eval(&self.ast, point)
    }
}
