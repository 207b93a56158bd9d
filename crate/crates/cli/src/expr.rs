//! Polynomial field expressions: `expr := term (('+'|'-') term)*`,
//! `term := factor ('*' factor)*`, `factor := '-' factor | atom ('^' int)*`,
//! `atom := number | x<k> | d<k> | '(' expr ')'`.

use std::fmt;

use srgeo_core::{Poly, VectorField};

use crate::error::{ParseError, ParseErrorKind};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Coordinate `x_k`, 1-based.
    Var(usize),
    /// Basis field `∂_k`, 1-based.
    Basis(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Basis(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

struct Lexed {
    tok: Tok,
    col: usize,
}

fn lex(text: &str, line: usize, col0: usize) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |c: usize, kind, msg: String| ParseError { line, col: col0 + c, kind, msg };
    while i < chars.len() {
        let c = chars[i];
        let col = i;
        match c {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '+' => out.push(Lexed { tok: Tok::Plus, col }),
            '-' => out.push(Lexed { tok: Tok::Minus, col }),
            '*' => out.push(Lexed { tok: Tok::Star, col }),
            '^' => out.push(Lexed { tok: Tok::Caret, col }),
            '(' => out.push(Lexed { tok: Tok::LParen, col }),
            ')' => out.push(Lexed { tok: Tok::RParen, col }),
            'x' | 'd' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let digits: String = chars[i + 1..j].iter().collect();
                let k: usize = digits.parse().map_err(|_| err(col, ParseErrorKind::Syntax, format!("expected an index after '{c}'")))?;
                if k == 0 {
                    return Err(err(col, ParseErrorKind::UnknownVariable, format!("indices start at 1, found {c}0")));
                }
                out.push(Lexed { tok: if c == 'x' { Tok::Var(k) } else { Tok::Basis(k) }, col });
                i = j;
                continue;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let v: f64 = s.parse().map_err(|_| err(col, ParseErrorKind::Syntax, format!("malformed number '{s}'")))?;
                out.push(Lexed { tok: Tok::Num(v), col });
                i = j;
                continue;
            }
            '/' => return Err(err(col, ParseErrorKind::NonPolynomial, "division is not allowed".into())),
            c if c.is_alphabetic() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_alphanumeric() {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                return Err(err(col, ParseErrorKind::NonPolynomial, format!("unknown symbol '{s}'; only x<k>, d<k> and numbers are allowed")));
            }
            _ => return Err(err(col, ParseErrorKind::Syntax, format!("unexpected character '{c}'"))),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    line: usize,
    col0: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn col(&self) -> usize {
        self.col0 + self.toks.get(self.pos).map_or(self.end_col, |l| l.col)
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col(), kind: ParseErrorKind::Syntax, msg: msg.into() }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let mut base = self.atom()?;
        while let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.peek() {
                Some(&Tok::Num(v)) if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) => {
                    self.pos += 1;
                    base = Expr::Pow(Box::new(base), v as u32);
                }
                _ => {
                    return Err(ParseError {
                        line: self.line,
                        col: self.col(),
                        kind: ParseErrorKind::NonPolynomial,
                        msg: "exponent must be a nonnegative integer".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().cloned().ok_or_else(|| self.error("unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Var(k) => Ok(Expr::Var(k)),
            Tok::Basis(k) => Ok(Expr::Basis(k)),
            Tok::LParen => {
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.error("expected ')'")),
                }
            }
            _ => {
                self.pos -= 1;
                Err(self.error("expected a number, x<k>, d<k> or '('"))
            }
        }
    }
}

/// Parses `text`, reporting positions as `line` and `col0 + offset` (1-based).
pub fn parse_expr(text: &str, line: usize, col0: usize) -> Result<Expr, ParseError> {
    let toks = lex(text, line, col0)?;
    let mut p = Parser { toks, pos: 0, line, col0, end_col: text.chars().count() };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

struct Wrap<'a>(&'a Expr, bool);

impl fmt::Display for Wrap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    /// Canonical text that parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(k) => write!(f, "x{k}"),
            Expr::Basis(k) => write!(f, "d{k}"),
            Expr::Neg(a) => write!(f, "-{}", Wrap(a, prec(a) < 3)),
            Expr::Add(a, b) => write!(f, "{} + {}", a, Wrap(b, prec(b) <= 1)),
            Expr::Sub(a, b) => write!(f, "{} - {}", a, Wrap(b, prec(b) <= 1)),
            Expr::Mul(a, b) => write!(f, "{}*{}", Wrap(a, prec(a) < 2), Wrap(b, prec(b) <= 2)),
            Expr::Pow(a, k) => write!(f, "{}^{k}", Wrap(a, prec(a) < 5)),
        }
    }
}

/// Value of an expression: a polynomial or a polynomial vector field.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(Poly<f64>),
    Field(Vec<Poly<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    UnknownVariable(usize),
    FieldProduct,
    FieldPower,
    MixedSum,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownVariable(k) => write!(f, "index {k} exceeds the dimension"),
            EvalError::FieldProduct => write!(f, "product of two vector fields"),
            EvalError::FieldPower => write!(f, "power of a vector field"),
            EvalError::MixedSum => write!(f, "sum of a scalar and a vector field"),
        }
    }
}

impl Expr {
    pub fn eval(&self, n: usize) -> Result<Value, EvalError> {
        use Value::*;
        Ok(match self {
            Expr::Num(v) => Scalar(Poly::constant(n, *v)),
            Expr::Var(k) if *k <= n => Scalar(Poly::var(n, k - 1)),
            Expr::Basis(k) if *k <= n => Field((0..n).map(|j| if j == k - 1 { Poly::one(n) } else { Poly::zero(n) }).collect()),
            Expr::Var(k) | Expr::Basis(k) => return Err(EvalError::UnknownVariable(*k)),
            Expr::Neg(a) => match a.eval(n)? {
                Scalar(p) => Scalar(p.scale(&-1.0)),
                Field(v) => Field(v.iter().map(|p| p.scale(&-1.0)).collect()),
            },
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let sign = if matches!(self, Expr::Sub(..)) { -1.0 } else { 1.0 };
                match (a.eval(n)?, b.eval(n)?) {
                    (Scalar(p), Scalar(q)) => Scalar(&p + &q.scale(&sign)),
                    (Field(u), Field(v)) => Field(u.iter().zip(&v).map(|(p, q)| p + &q.scale(&sign)).collect()),
                    _ => return Err(EvalError::MixedSum),
                }
            }
            Expr::Mul(a, b) => match (a.eval(n)?, b.eval(n)?) {
                (Scalar(p), Scalar(q)) => Scalar(&p * &q),
                (Scalar(p), Field(v)) | (Field(v), Scalar(p)) => Field(v.iter().map(|q| &p * q).collect()),
                (Field(_), Field(_)) => return Err(EvalError::FieldProduct),
            },
            Expr::Pow(a, k) => match a.eval(n)? {
                Scalar(p) => Scalar(p.pow(*k)),
                Field(_) => return Err(EvalError::FieldPower),
            },
        })
    }

    pub fn to_field(&self, n: usize) -> Result<VectorField<f64>, EvalError> {
        match self.eval(n)? {
            Value::Field(v) => Ok(VectorField::new(v).expect("consistent dimension")),
            Value::Scalar(p) if p.is_zero() => Ok(VectorField::zero(n)),
            Value::Scalar(_) => Err(EvalError::MixedSum),
        }
    }

    pub fn to_poly(&self, n: usize) -> Result<Poly<f64>, EvalError> {
        match self.eval(n)? {
            Value::Scalar(p) => Ok(p),
            Value::Field(_) => Err(EvalError::MixedSum),
        }
    }

    /// Largest coordinate or basis index used.
    pub fn max_index(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(k) | Expr::Basis(k) => *k,
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_index().max(b.max_index()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_heisenberg_field() {
        let e = parse_expr("d1 - 0.5*x2*d3", 1, 1).unwrap();
        let f = e.to_field(3).unwrap();
        assert_eq!(f.coeff(0), &Poly::one(3));
        assert_eq!(f.coeff(2), &Poly::var(3, 1).scale(&-0.5));
    }

    #[test]
    fn precedence_and_powers() {
        let e = parse_expr("2*x1^2 + (x1 + x2)*x2", 1, 1).unwrap();
        let p = e.to_poly(2).unwrap();
        assert_eq!(p.eval(&[1.0, 2.0]), 2.0 + 6.0);
        let n = parse_expr("-x1^2", 1, 1).unwrap();
        assert_eq!(n.to_poly(1).unwrap().eval(&[3.0]), -9.0);
    }

    #[test]
    fn errors_carry_columns() {
        let e = parse_expr("d1 + x2/2", 4, 6).unwrap_err();
        assert_eq!((e.line, e.col, e.kind), (4, 13, ParseErrorKind::NonPolynomial));
        let e = parse_expr("d1 + (x2", 1, 1).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert!(parse_expr("sin(x1)", 1, 1).is_err());
        assert!(parse_expr("x1^0.5", 1, 1).is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["d1 - 0.5*x2*d3", "-(x1 - x2)*d1", "x1 - (x2 - x3)", "(x1*x2)^3*d2", "x1*(x2*x3)", "--x1", "1e-7*x1*d1"] {
            let e = parse_expr(s, 1, 1).unwrap();
            assert_eq!(parse_expr(&e.to_string(), 1, 1).unwrap(), e, "{s} -> {e}");
        }
    }
}
