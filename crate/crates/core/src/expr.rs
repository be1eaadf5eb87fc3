//! Text syntax for operators.
//!
//! ```text
//! expr    := term (("+" | "-") term)* ;
//! term    := ("-")? factor ("*" factor)* ;
//! factor  := atom ("^" uint)? ;
//! atom    := rational | symbol | "(" expr ")" ;
//! symbol  := "t" | "u" | "a" | "b" | "w" | "Dt" | "Du" ;
//! rational:= uint ("/" uint)? ;
//! ```
//!
//! `*` is composition, so `Dt*t` evaluates to `t*Dt + 1`.

use std::fmt::{self, Write as _};

use num_bigint::BigInt;

use crate::polyring::{ParamPoly, Var, EXPONENT_CAP};
use crate::rational::Rational;
use crate::weyl::{DiffOp, WeylError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Var(Var),
    Dt,
    Du,
}

/// Parsed syntax tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OperatorExpr {
    Num(Rational),
    Sym(Symbol),
    Neg(Box<OperatorExpr>),
    Add(Box<OperatorExpr>, Box<OperatorExpr>),
    Sub(Box<OperatorExpr>, Box<OperatorExpr>),
    Mul(Box<OperatorExpr>, Box<OperatorExpr>),
    Pow(Box<OperatorExpr>, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("expected {expected}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
    #[error("exponent {0} exceeds the cap")]
    ExponentOverflow(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("evaluation failed: {0}")]
    Eval(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(String),
    Sym(Symbol),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(s) => write!(f, "number {s}"),
            Tok::Sym(_) => f.write_str("symbol"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let err = |kind| ParseError {
            line: l0,
            column: c0,
            kind,
        };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Spanned {
                tok: Tok::Int(s),
                line: l0,
                column: c0,
            });
            continue;
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let sym = match s.as_str() {
                "t" => Symbol::Var(Var::T),
                "u" => Symbol::Var(Var::U),
                "a" => Symbol::Var(Var::A),
                "b" => Symbol::Var(Var::B),
                "w" => Symbol::Var(Var::W),
                "Dt" => Symbol::Dt,
                "Du" => Symbol::Du,
                _ => return Err(err(ParseErrorKind::UnknownSymbol(s))),
            };
            out.push(Spanned {
                tok: Tok::Sym(sym),
                line: l0,
                column: c0,
            });
            continue;
        } else {
            match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '^' => Tok::Caret,
                '/' => Tok::Slash,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                other => return Err(err(ParseErrorKind::UnexpectedChar(other))),
            }
        };
        out.push(Spanned {
            tok,
            line: l0,
            column: c0,
        });
        i += 1;
        col += 1;
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> &Spanned {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            column: t.column,
            kind,
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        self.error_here(ParseErrorKind::Unexpected {
            expected,
            found: self.peek().to_string(),
        })
    }

    fn expr(&mut self) -> Result<OperatorExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = OperatorExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = OperatorExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<OperatorExpr, ParseError> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = OperatorExpr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(if negate {
            OperatorExpr::Neg(Box::new(lhs))
        } else {
            lhs
        })
    }

    fn factor(&mut self) -> Result<OperatorExpr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let e = self.uint("exponent")?;
            return match e.parse::<u32>() {
                Ok(n) if n < EXPONENT_CAP => Ok(OperatorExpr::Pow(Box::new(base), n)),
                _ => {
                    self.pos -= 1;
                    Err(self.error_here(ParseErrorKind::ExponentOverflow(e)))
                }
            };
        }
        Ok(base)
    }

    fn uint(&mut self, what: &'static str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn atom(&mut self) -> Result<OperatorExpr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                let num: BigInt = n.parse().expect("lexer yields digits");
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let d = self.uint("denominator")?;
                    let den: BigInt = d.parse().expect("lexer yields digits");
                    if den == BigInt::from(0) {
                        self.pos -= 1;
                        return Err(self.error_here(ParseErrorKind::ZeroDenominator));
                    }
                    let r = Rational::from_bigints(num, den).expect("nonzero denominator");
                    return Ok(OperatorExpr::Num(r));
                }
                Ok(OperatorExpr::Num(Rational::from(num)))
            }
            Tok::Sym(s) => {
                self.bump();
                Ok(OperatorExpr::Sym(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("')'"));
                }
                self.bump();
                Ok(e)
            }
            _ => Err(self.unexpected("number, symbol or '('")),
        }
    }
}

/// Parses source text into a syntax tree.
pub fn parse_expr(src: &str) -> Result<OperatorExpr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("operator or end of input"));
    }
    Ok(e)
}

impl OperatorExpr {
    /// Evaluates in the Weyl algebra to normal form.
    pub fn eval(&self) -> Result<DiffOp, WeylError> {
        Ok(match self {
            OperatorExpr::Num(r) => DiffOp::from_poly(ParamPoly::constant(r.clone())),
            OperatorExpr::Sym(Symbol::Var(v)) => DiffOp::from_poly(ParamPoly::var(*v)),
            OperatorExpr::Sym(Symbol::Dt) => DiffOp::dt(),
            OperatorExpr::Sym(Symbol::Du) => DiffOp::du(),
            OperatorExpr::Neg(e) => e.eval()?.neg(),
            OperatorExpr::Add(x, y) => x.eval()?.add(&y.eval()?),
            OperatorExpr::Sub(x, y) => x.eval()?.sub(&y.eval()?),
            OperatorExpr::Mul(x, y) => x.eval()?.compose(&y.eval()?)?,
            OperatorExpr::Pow(x, n) => x.eval()?.pow(*n)?,
        })
    }
}

/// Parses and evaluates an operator expression.
pub fn parse_operator(src: &str) -> Result<DiffOp, ParseError> {
    let e = parse_expr(src)?;
    e.eval().map_err(|err| ParseError {
        line: 1,
        column: 1,
        kind: ParseErrorKind::Eval(err.to_string()),
    })
}

/// Parses an expression that must be free of `Dt`, `Du`.
pub fn parse_poly(src: &str) -> Result<ParamPoly, ParseError> {
    let op = parse_operator(src)?;
    match op.terms().keys().find(|k| **k != (0, 0)) {
        Some(_) => Err(ParseError {
            line: 1,
            column: 1,
            kind: ParseErrorKind::Eval("expected a polynomial without derivatives".into()),
        }),
        None => Ok(op.coeff(0, 0)),
    }
}

fn derivative_suffix(i: u32, j: u32) -> String {
    let mut s = String::new();
    for (name, e) in [("Dt", i), ("Du", j)] {
        match e {
            0 => {}
            1 => {
                s.push('*');
                s.push_str(name);
            }
            _ => {
                let _ = write!(s, "*{name}^{e}");
            }
        }
    }
    s
}

/// Canonical text rendering; `parse_operator(print_operator(A)) == A`.
pub fn print_operator(op: &DiffOp) -> String {
    if op.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    let push = |neg: bool, body: &str, out: &mut String| {
        match (out.is_empty(), neg) {
            (true, true) => out.push('-'),
            (true, false) => {}
            (false, true) => out.push_str(" - "),
            (false, false) => out.push_str(" + "),
        }
        out.push_str(body);
    };
    for (&(i, j), p) in op.terms() {
        let suffix = derivative_suffix(i, j);
        if suffix.is_empty() {
            for (m, c) in p.terms() {
                let single = ParamPoly::term(*m, c.abs());
                push(c.is_negative(), &single.to_string(), &mut out);
            }
        } else if p.len() == 1 {
            let (m, c) = &p.terms()[0];
            let single = ParamPoly::term(*m, c.abs());
            let body = if single.as_constant().is_some_and(|v| v.is_one()) {
                suffix[1..].to_string()
            } else {
                format!("{single}{suffix}")
            };
            push(c.is_negative(), &body, &mut out);
        } else {
            push(false, &format!("({p}){suffix}"), &mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dt_t_commutator_is_one() {
        assert_eq!(parse_operator("Dt*t - t*Dt").unwrap(), DiffOp::identity());
    }

    #[test]
    fn zero_and_dt_print() {
        assert_eq!(print_operator(&DiffOp::zero()), "0");
        assert_eq!(print_operator(&DiffOp::dt()), "Dt");
        assert!(parse_operator("0").unwrap().is_zero());
    }

    #[test]
    fn round_trip_simple() {
        for src in [
            "-3/2*t^2*Du + (a - w)*Dt^2*Du^3 + 7",
            "Dt*Dt*t",
            "-(t - u)^3*Du",
            "w*Dt - Du",
        ] {
            let op = parse_operator(src).unwrap();
            let printed = print_operator(&op);
            assert_eq!(parse_operator(&printed).unwrap(), op, "{src} -> {printed}");
        }
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_operator("t +\n  x").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert!(matches!(e.kind, ParseErrorKind::UnknownSymbol(_)));
        let e = parse_operator("t^99999").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ExponentOverflow(_)));
        assert!(parse_operator("t u").is_err());
        assert!(parse_operator("1/0").is_err());
        assert!(parse_operator("(t").is_err());
    }
}
