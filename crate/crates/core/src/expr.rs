//! A deliberately small expression language for speeds and initial data.
//!
//! Grammar: numbers, coordinates `x1` and `x2`, the Euclidean norm `|x|`,
//! absolute value `|e|`, `+`, `-` (binary and unary), `*`, parentheses and the
//! functions `tanh(e)`, `min(a, b)`, `max(a, b)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::Point;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    Norm,
    Abs(Box<Node>),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Tanh(Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, p: Point) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Coord(i) => p[*i],
            Node::Norm => p[0].hypot(p[1]),
            Node::Abs(a) => a.eval(p).abs(),
            Node::Neg(a) => -a.eval(p),
            Node::Add(a, b) => a.eval(p) + b.eval(p),
            Node::Sub(a, b) => a.eval(p) - b.eval(p),
            Node::Mul(a, b) => a.eval(p) * b.eval(p),
            Node::Tanh(a) => a.eval(p).tanh(),
            Node::Min(a, b) => a.eval(p).min(b.eval(p)),
            Node::Max(a, b) => a.eval(p).max(b.eval(p)),
        }
    }

    fn max_coord(&self) -> usize {
        match self {
            Node::Const(_) => 0,
            Node::Coord(i) => i + 1,
            Node::Norm => 1,
            Node::Abs(a) | Node::Neg(a) | Node::Tanh(a) => a.max_coord(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Min(a, b) | Node::Max(a, b) => {
                a.max_coord().max(b.max_coord())
            }
        }
    }
}

/// A parsed expression in the point coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    src: String,
    node: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let node = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected '{}' in '{src}'",
                p.tokens[p.pos]
            )));
        }
        Ok(Expr {
            src: src.trim().to_string(),
            node,
        })
    }

    pub fn constant(c: f64) -> Self {
        Expr {
            src: format!("{c}"),
            node: Node::Const(c),
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.node.eval(p)
    }

    /// `Some(c)` if the expression is a bare constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.node {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Highest coordinate index used, plus one (0 for constants).
    pub fn dimension_used(&self) -> usize {
        self.node.max_coord()
    }

    pub fn source(&self) -> &str {
        &self.src
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.as_constant() {
            Some(c) => s.serialize_f64(c),
            None => s.serialize_str(&self.src),
        }
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) => Ok(Expr::constant(c)),
            Raw::Int(c) => Ok(Expr::constant(c as f64)),
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "{n}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Sym(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*(),|".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Expr(format!(
                "expected '{c}', found {}",
                self.peek().map_or("end of input".to_string(), |t| format!("'{t}'"))
            )))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while self.eat('*') {
            lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expr("unexpected end of input".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym('|') => {
                if self.peek() == Some(&Tok::Ident("x".into()))
                    && self.tokens.get(self.pos + 1) == Some(&Tok::Sym('|'))
                {
                    self.pos += 2;
                    return Ok(Node::Norm);
                }
                let e = self.expr()?;
                self.expect('|')?;
                Ok(Node::Abs(Box::new(e)))
            }
            Tok::Ident(name) => match name.as_str() {
                "x1" => Ok(Node::Coord(0)),
                "x2" => Ok(Node::Coord(1)),
                "tanh" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    Ok(Node::Tanh(Box::new(a)))
                }
                "min" | "max" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(',')?;
                    let b = self.expr()?;
                    self.expect(')')?;
                    let (a, b) = (Box::new(a), Box::new(b));
                    Ok(if name == "min" { Node::Min(a, b) } else { Node::Max(a, b) })
                }
                "x" => Err(Error::Expr("bare 'x' is only allowed as |x|; use x1 or x2".into())),
                other => Err(Error::Expr(format!("unknown identifier '{other}'"))),
            },
            Tok::Sym(c) => Err(Error::Expr(format!("unexpected '{c}'"))),
        }
    }
}
