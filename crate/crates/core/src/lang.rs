//! Text grammar for expressions and generator expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ['^' ['-'] integer]
//! atom   := integer | 'i' | ident | fn '(' expr ')' | '(' expr ')' | '{' expr ',' expr '}'
//! ```
//!
//! `x1 x2 x3 r rt phi theta` are coordinates and geometric atoms, `i` is the
//! imaginary unit, `sin cos exp ln sqrt` are functions, and every other
//! identifier is a parameter. Operator sources additionally accept the
//! generators `P1..P3 K1..K3 L1..L3 D` (with `J1..J3` read as `L1..L3`) and
//! anticommutators `{A,B}`.

use std::fmt;

use rug::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::diffop::{Generator, GeneratorExpr};
use crate::expr::{Expr, Func, Geom, Node};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[error("at offset {offset}: {message} (expected {})", expected.join(", "))]
pub struct ParseDiagnostic {
    pub offset: usize,
    pub expected: Vec<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(Integer),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("number {n}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseDiagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'.' || bytes[i] == b'e' || bytes[i] == b'E') {
                    return Err(ParseDiagnostic {
                        offset: i,
                        expected: vec!["integer".into()],
                        message: "floating-point literals are not supported; write a ratio p/q".into(),
                    });
                }
                let n: Integer = src[start..i].parse().expect("digits");
                out.push((Tok::Int(n), start));
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {}
        }
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'{' => Tok::LBrace,
            b'}' => Tok::RBrace,
            b',' => Tok::Comma,
            _ => {
                let ch = src[i..].chars().next().unwrap();
                return Err(ParseDiagnostic {
                    offset: i,
                    expected: vec!["expression".into()],
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, i));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

fn generator_token(name: &str) -> Option<Generator> {
    let b = name.as_bytes();
    if name == "D" {
        return Some(Generator::D);
    }
    if b.len() != 2 || !(b'1'..=b'3').contains(&b[1]) {
        return None;
    }
    let a = b[1] - b'0';
    match b[0] {
        b'P' => Some(Generator::P(a)),
        b'K' => Some(Generator::K(a)),
        b'L' | b'J' => Some(Generator::L(a)),
        _ => None,
    }
}

fn looks_like_generator(name: &str) -> bool {
    let b = name.as_bytes();
    b.len() == 2 && matches!(b[0], b'P' | b'K' | b'L' | b'J') && b[1].is_ascii_digit()
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    operators: bool,
    _src: &'a str,
}

const OPERAND: [&str; 4] = ["number", "identifier", "`(`", "`-`"];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str], message: impl Into<String>) -> Result<T, ParseDiagnostic> {
        Err(ParseDiagnostic {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message: message.into(),
        })
    }

    fn expect(&mut self, t: Tok, name: &str) -> Result<(), ParseDiagnostic> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            let found = self.peek().describe();
            self.fail(&[name], format!("found {found}"))
        }
    }

    fn expr(&mut self) -> Result<GeneratorExpr, ParseDiagnostic> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let t = self.term()?;
                    acc = add(acc, t);
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.term()?;
                    acc = add(acc, neg(t));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<GeneratorExpr, ParseDiagnostic> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let f = self.unary()?;
                    acc = mul(acc, f);
                }
                Tok::Slash => {
                    self.bump();
                    let at = self.offset();
                    let f = self.unary()?;
                    match f {
                        GeneratorExpr::Scalar(d) => acc = mul(acc, GeneratorExpr::Scalar(d.recip())),
                        _ => {
                            return Err(ParseDiagnostic {
                                offset: at,
                                expected: vec!["scalar expression".into()],
                                message: "division by an operator".into(),
                            })
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<GeneratorExpr, ParseDiagnostic> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<GeneratorExpr, ParseDiagnostic> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let n = self.exponent()?;
        match base {
            GeneratorExpr::Scalar(e) => Ok(GeneratorExpr::Scalar(Expr::pow(&e, n))),
            op if n >= 1 => Ok(GeneratorExpr::Product(vec![op; n as usize])),
            _ => Err(ParseDiagnostic {
                offset: at,
                expected: vec!["positive integer".into()],
                message: "operator powers must be positive".into(),
            }),
        }
    }

    fn exponent(&mut self) -> Result<i64, ParseDiagnostic> {
        let bad = |p: &Parser| {
            p.fail::<i64>(&["integer"], "exponent must be an integer literal")
        };
        let paren = *self.peek() == Tok::LParen;
        if paren {
            self.bump();
        }
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        let n = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                match n.to_i64() {
                    Some(v) if v <= 1 << 20 => v,
                    _ => return self.fail(&["integer"], "exponent too large"),
                }
            }
            _ => return bad(self),
        };
        if paren {
            if *self.peek() != Tok::RParen {
                return bad(self);
            }
            self.bump();
        }
        let mut n = if negative { -n } else { n };
        if *self.peek() == Tok::Caret {
            // right associative: x^2^3 = x^(2^3)
            self.bump();
            let m = self.exponent()?;
            if m < 0 || m > 20 {
                return self.fail(&["small non-negative integer"], "exponent too large");
            }
            n = match n.checked_pow(m as u32) {
                Some(v) if v.abs() <= 1 << 20 => v,
                _ => return self.fail(&["integer"], "exponent too large"),
            };
        }
        Ok(n)
    }

    fn atom(&mut self) -> Result<GeneratorExpr, ParseDiagnostic> {
        let at = self.offset();
        match self.bump() {
            Tok::Int(n) => Ok(GeneratorExpr::Scalar(Expr::constant(Scalar::from(n)))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBrace => {
                if !self.operators {
                    return Err(ParseDiagnostic {
                        offset: at,
                        expected: OPERAND.iter().map(|s| s.to_string()).collect(),
                        message: "anticommutators are only allowed in operator expressions".into(),
                    });
                }
                let a = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let b = self.expr()?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok(GeneratorExpr::Anti(Box::new(a), Box::new(b)))
            }
            Tok::Ident(name) => self.ident(name, at),
            other => Err(ParseDiagnostic {
                offset: at,
                expected: OPERAND.iter().map(|s| s.to_string()).collect(),
                message: format!("found {}", other.describe()),
            }),
        }
    }

    fn ident(&mut self, name: String, at: usize) -> Result<GeneratorExpr, ParseDiagnostic> {
        if let Some(func) = Func::from_name(&name) {
            self.expect(Tok::LParen, "`(`")?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return match arg {
                GeneratorExpr::Scalar(e) => Ok(GeneratorExpr::Scalar(Expr::apply(func, e))),
                _ => Err(ParseDiagnostic {
                    offset: at,
                    expected: vec!["scalar argument".into()],
                    message: format!("`{name}` applied to an operator"),
                }),
            };
        }
        let scalar = |e: Expr| Ok(GeneratorExpr::Scalar(e));
        match name.as_str() {
            "x1" => scalar(Expr::coord(1)),
            "x2" => scalar(Expr::coord(2)),
            "x3" => scalar(Expr::coord(3)),
            "r" => scalar(Expr::geom(Geom::R)),
            "rt" => scalar(Expr::geom(Geom::Rt)),
            "phi" => scalar(Expr::geom(Geom::Phi)),
            "theta" => scalar(Expr::geom(Geom::Theta)),
            "i" => scalar(Expr::i()),
            _ if self.operators => match generator_token(&name) {
                Some(g) => Ok(GeneratorExpr::Gen(g)),
                None if looks_like_generator(&name) => Err(ParseDiagnostic {
                    offset: at,
                    expected: vec!["P1..P3, K1..K3, L1..L3, D".into()],
                    message: format!("unknown generator `{name}`"),
                }),
                None => scalar(Expr::param(&name)),
            },
            _ => scalar(Expr::param(&name)),
        }
    }
}

fn add(a: GeneratorExpr, b: GeneratorExpr) -> GeneratorExpr {
    match (a, b) {
        (GeneratorExpr::Scalar(x), GeneratorExpr::Scalar(y)) => GeneratorExpr::Scalar(&x + &y),
        (GeneratorExpr::Sum(mut v), GeneratorExpr::Sum(w)) => {
            v.extend(w);
            GeneratorExpr::Sum(v)
        }
        (GeneratorExpr::Sum(mut v), y) => {
            v.push(y);
            GeneratorExpr::Sum(v)
        }
        (x, y) => GeneratorExpr::Sum(vec![x, y]),
    }
}

fn mul(a: GeneratorExpr, b: GeneratorExpr) -> GeneratorExpr {
    match (a, b) {
        (GeneratorExpr::Scalar(x), GeneratorExpr::Scalar(y)) => GeneratorExpr::Scalar(&x * &y),
        (GeneratorExpr::Product(mut v), GeneratorExpr::Product(w)) => {
            v.extend(w);
            GeneratorExpr::Product(v)
        }
        (GeneratorExpr::Product(mut v), y) => {
            v.push(y);
            GeneratorExpr::Product(v)
        }
        (x, GeneratorExpr::Product(mut w)) => {
            w.insert(0, x);
            GeneratorExpr::Product(w)
        }
        (x, y) => GeneratorExpr::Product(vec![x, y]),
    }
}

fn neg(a: GeneratorExpr) -> GeneratorExpr {
    match a {
        GeneratorExpr::Scalar(x) => GeneratorExpr::Scalar(-x),
        op => mul(GeneratorExpr::Scalar(Expr::int(-1)), op),
    }
}

fn run(src: &str, operators: bool) -> Result<GeneratorExpr, ParseDiagnostic> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        operators,
        _src: src,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        let found = p.peek().describe();
        let mut expected = vec!["`+`", "`-`", "`*`", "`/`", "`^`"];
        expected.push("end of input");
        return p.fail(&expected, format!("unexpected {found}"));
    }
    Ok(e)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseDiagnostic> {
    match run(src, false)? {
        GeneratorExpr::Scalar(e) => Ok(e),
        _ => unreachable!("generators are disabled in scalar mode"),
    }
}

pub fn parse_operator(src: &str) -> Result<GeneratorExpr, ParseDiagnostic> {
    run(src, true)
}

// ---- serialisation --------------------------------------------------------

/// Binding strength of the printed form, used to decide on parentheses.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Sum,
    Product,
    Unary,
    Atom,
}

fn ser(e: &Expr) -> (String, Prec) {
    match e.node() {
        Node::Const(c) => {
            let s = c.to_string();
            let p = if s.starts_with('(') {
                Prec::Atom
            } else if s.starts_with('-') {
                Prec::Unary
            } else if s.contains('/') || s.contains('*') {
                Prec::Product
            } else {
                Prec::Atom
            };
            (s, p)
        }
        Node::Coord(a) => (format!("x{a}"), Prec::Atom),
        Node::Geom(g) => (g.name().to_string(), Prec::Atom),
        Node::Param(p) => (p.to_string(), Prec::Atom),
        Node::Apply(f, a) => (format!("{}({})", f.name(), ser(a).0), Prec::Atom),
        Node::Sum(v) => {
            let mut s = String::new();
            for (k, t) in v.iter().enumerate() {
                let (ts, _) = ser(t);
                if k == 0 {
                    s.push_str(&ts);
                } else if let Some(rest) = ts.strip_prefix('-') {
                    s.push_str(" - ");
                    s.push_str(rest);
                } else {
                    s.push_str(" + ");
                    s.push_str(&ts);
                }
            }
            (s, Prec::Sum)
        }
        Node::Pow(..) | Node::Product(_) => ser_product(e),
    }
}

fn wrap(s: (String, Prec), min: Prec) -> String {
    if s.1 < min {
        format!("({})", s.0)
    } else {
        s.0
    }
}

fn ser_power(base: &Expr, n: i64) -> String {
    let b = wrap(ser(base), Prec::Atom);
    if n == 1 {
        b
    } else {
        format!("{b}^{n}")
    }
}

fn ser_product(e: &Expr) -> (String, Prec) {
    let factors: Vec<Expr> = match e.node() {
        Node::Product(v) => v.clone(),
        _ => vec![e.clone()],
    };
    let mut coeff = Scalar::one();
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    for f in &factors {
        match f.node() {
            Node::Const(c) => coeff = c.clone(),
            Node::Pow(b, n) if *n < 0 => den.push(ser_power(b, -n)),
            Node::Pow(b, n) => num.push(ser_power(b, *n)),
            _ => num.push(wrap(ser(f), Prec::Atom)),
        }
    }
    let mut sign = "";
    if coeff.is_real() {
        if coeff.re < 0 {
            sign = "-";
            coeff = -coeff;
        }
        let n = Integer::from(coeff.re.numer());
        let d = Integer::from(coeff.re.denom());
        if n != 1 {
            num.insert(0, n.to_string());
        }
        if d != 1 {
            den.insert(0, d.to_string());
        }
    } else {
        num.insert(0, wrap(ser(&Expr::constant(coeff.clone())), Prec::Atom));
    }
    let mut s = String::from(sign);
    if num.is_empty() {
        s.push('1');
    } else {
        s.push_str(&num.join("*"));
    }
    match den.len() {
        0 => {}
        1 => {
            s.push('/');
            s.push_str(&den[0]);
        }
        _ => {
            s.push_str("/(");
            s.push_str(&den.join("*"));
            s.push(')');
        }
    }
    let p = if !sign.is_empty() {
        Prec::Unary
    } else if num.len() + den.len() > 1 || !den.is_empty() {
        Prec::Product
    } else {
        Prec::Atom
    };
    (s, p)
}

pub fn serialize_expr(e: &Expr) -> String {
    ser(e).0
}

fn ser_op(g: &GeneratorExpr) -> (String, Prec) {
    match g {
        GeneratorExpr::Gen(x) => (x.to_string(), Prec::Atom),
        GeneratorExpr::Scalar(e) => ser(e),
        GeneratorExpr::Anti(a, b) => (format!("{{{},{}}}", ser_op(a).0, ser_op(b).0), Prec::Atom),
        GeneratorExpr::Product(v) => (
            v.iter()
                .map(|f| wrap(ser_op(f), Prec::Unary))
                .collect::<Vec<_>>()
                .join("*"),
            Prec::Product,
        ),
        GeneratorExpr::Sum(v) => {
            let mut s = String::new();
            for (k, t) in v.iter().enumerate() {
                let (ts, _) = ser_op(t);
                if k == 0 {
                    s.push_str(&ts);
                } else if let Some(rest) = ts.strip_prefix('-') {
                    s.push_str(" - ");
                    s.push_str(rest);
                } else {
                    s.push_str(" + ");
                    s.push_str(&ts);
                }
            }
            (s, Prec::Sum)
        }
    }
}

pub fn serialize_operator(g: &GeneratorExpr) -> String {
    ser_op(g).0
}

impl fmt::Display for GeneratorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_operator(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = parse_expr("-x1^2").unwrap();
        assert_eq!(e, -Expr::pow(&Expr::coord(1), 2));
        let e = parse_expr("x1^2^3").unwrap();
        assert_eq!(e, Expr::pow(&Expr::coord(1), 8));
    }

    #[test]
    fn incomplete_input_offset() {
        let d = parse_expr("x1 +").unwrap_err();
        assert_eq!(d.offset, 4);
        assert!(!d.expected.is_empty());
    }

    #[test]
    fn non_integer_exponent() {
        let d = parse_expr("x1^y").unwrap_err();
        assert!(d.message.contains("integer"));
        let d = parse_expr("x1^1.5").unwrap_err();
        assert!(d.message.contains("floating"));
    }

    #[test]
    fn operator_tokens() {
        let g = parse_operator("{L3,D} + 2*c*ln(r)").unwrap();
        assert!(matches!(g, GeneratorExpr::Sum(_)));
        let d = parse_operator("Q1 + P4").unwrap_err();
        assert!(d.message.contains("unknown generator"));
    }

    #[test]
    fn serialise_round_trip() {
        for src in [
            "c1*exp(-2*phi)*(r^2+x3^2)/rt^2",
            "x3^2/x1^2",
            "-3/4*x1*x2/(x3^2*r)",
            "(1/2-3*i)*sin(theta)^2 - 1",
            "x3/r + 2*ln(r) - phi",
        ] {
            let e = parse_expr(src).unwrap();
            let s = serialize_expr(&e);
            assert_eq!(parse_expr(&s).unwrap(), e, "{src} -> {s}");
        }
    }
}
