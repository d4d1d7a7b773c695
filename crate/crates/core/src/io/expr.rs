//! Closed-form conformal factors: finite sums of lattice harmonics
//! `c·sin(2π(p λ₁ + q λ₂))`, `c·cos(2π(p λ₁ + q λ₂))` plus a constant.
//!
//! `x`/`lambda1` and `y`/`lambda2` name the lattice coordinates. Inside a
//! trig call any linear expression is accepted as long as it reduces to
//! `2π(p x + q y)` with integer `p`, `q`, e.g. `sin(2pi*x)`, `cos(4*pi*(x - y))`.

use std::fmt;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{LatticeSpec, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub coeff: f64,
    pub trig: Trig,
    pub p: i64,
    pub q: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UExpr {
    pub constant: f64,
    pub terms: Vec<Harmonic>,
}

impl UExpr {
    pub fn eval(&self, l1: f64, l2: f64) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|h| {
                    let ph = TAU * (h.p as f64 * l1 + h.q as f64 * l2);
                    h.coeff
                        * match h.trig {
                            Trig::Sin => ph.sin(),
                            Trig::Cos => ph.cos(),
                        }
                })
                .sum::<f64>()
    }

    pub fn sample(&self, lattice: LatticeSpec) -> ScalarField {
        ScalarField::from_lattice_fn(lattice, |a, b| self.eval(a, b))
    }
}

impl fmt::Display for UExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if self.constant != 0.0 || self.terms.is_empty() {
            write!(f, "{:?}", self.constant)?;
            first = false;
        }
        for h in &self.terms {
            let name = match h.trig {
                Trig::Sin => "sin",
                Trig::Cos => "cos",
            };
            let neg = h.coeff.is_sign_negative();
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            first = false;
            write!(f, "{:?}*{name}(2pi*({}*x + {}*y))", h.coeff.abs(), h.p, h.q)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for UExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let tokens = tokenize(s)?;
        let mut p = Parser { tokens, pos: 0, src: s };
        let e = p.expression()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Open,
    Close,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' | '−' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' | '·' => {
                out.push(Tok::Star);
                i += 1;
            }
            '(' => {
                out.push(Tok::Open);
                i += 1;
            }
            ')' => {
                out.push(Tok::Close);
                i += 1;
            }
            'π' => {
                out.push(Tok::Ident("pi".into()));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
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
                    .map_err(|_| Error::Parse(format!("bad number '{text}' in u expression")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect::<String>().to_ascii_lowercase()));
            }
            _ => return Err(Error::Parse(format!("unexpected character '{c}' in u expression"))),
        }
    }
    Ok(out)
}

/// `c + a x + b y`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Linear {
    c: f64,
    a: f64,
    b: f64,
}

impl Linear {
    fn constant(c: f64) -> Self {
        Self { c, a: 0.0, b: 0.0 }
    }

    fn is_constant(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at token {} of u expression '{}'", self.pos + 1, self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expression(&mut self) -> Result<UExpr> {
        let mut e = UExpr::default();
        let mut sign = 1.0;
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            sign = -1.0;
        } else if matches!(self.peek(), Some(Tok::Plus)) {
            self.bump();
        }
        loop {
            self.term(sign, &mut e)?;
            match self.peek() {
                Some(Tok::Plus) => sign = 1.0,
                Some(Tok::Minus) => sign = -1.0,
                _ => break,
            }
            self.bump();
        }
        Ok(e)
    }

    /// `[number ['*']] (sin|cos) '(' linear ')'` or a bare number.
    fn term(&mut self, sign: f64, e: &mut UExpr) -> Result<()> {
        let mut coeff = sign;
        let mut bare_number = false;
        if let Some(Tok::Num(v)) = self.peek() {
            coeff *= *v;
            bare_number = true;
            self.bump();
            if matches!(self.peek(), Some(Tok::Star)) {
                self.bump();
                bare_number = false;
            }
        }
        let trig = match self.peek() {
            Some(Tok::Ident(name)) if name == "sin" => Trig::Sin,
            Some(Tok::Ident(name)) if name == "cos" => Trig::Cos,
            Some(Tok::Ident(name)) => {
                return Err(self.error(&format!("unsupported function or symbol '{name}' (only sin and cos)")))
            }
            _ if bare_number => {
                e.constant += coeff;
                return Ok(());
            }
            _ => return Err(self.error("expected a number, sin or cos")),
        };
        self.bump();
        if self.bump() != Some(Tok::Open) {
            return Err(self.error("expected '(' after trig function"));
        }
        let arg = self.linear_sum()?;
        if self.bump() != Some(Tok::Close) {
            return Err(self.error("expected ')'"));
        }
        let (p, q) = frequencies(arg).map_err(|m| self.error(&m))?;
        e.terms.push(Harmonic { coeff, trig, p, q });
        Ok(())
    }

    fn linear_sum(&mut self) -> Result<Linear> {
        let mut sign = 1.0;
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            sign = -1.0;
        }
        let mut acc = Linear::constant(0.0);
        loop {
            let t = self.linear_product()?;
            acc = Linear { c: acc.c + sign * t.c, a: acc.a + sign * t.a, b: acc.b + sign * t.b };
            match self.peek() {
                Some(Tok::Plus) => sign = 1.0,
                Some(Tok::Minus) => sign = -1.0,
                _ => return Ok(acc),
            }
            self.bump();
        }
    }

    /// Product of factors, with implicit multiplication (`2pi(x+y)`).
    fn linear_product(&mut self) -> Result<Linear> {
        let mut acc = self.linear_factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                }
                Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Open) => {}
                _ => return Ok(acc),
            }
            let f = self.linear_factor()?;
            acc = if acc.is_constant() {
                Linear { c: acc.c * f.c, a: acc.c * f.a, b: acc.c * f.b }
            } else if f.is_constant() {
                Linear { c: acc.c * f.c, a: acc.a * f.c, b: acc.b * f.c }
            } else {
                return Err(self.error("trig argument must be linear in x and y"));
            };
        }
    }

    fn linear_factor(&mut self) -> Result<Linear> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Linear::constant(v)),
            Some(Tok::Ident(name)) => match name.as_str() {
                "pi" => Ok(Linear::constant(PI)),
                "x" | "lambda1" | "l1" => Ok(Linear { c: 0.0, a: 1.0, b: 0.0 }),
                "y" | "lambda2" | "l2" => Ok(Linear { c: 0.0, a: 0.0, b: 1.0 }),
                other => Err(self.error(&format!("unknown symbol '{other}' (use x, y, pi)"))),
            },
            Some(Tok::Minus) => {
                let f = self.linear_factor()?;
                Ok(Linear { c: -f.c, a: -f.a, b: -f.b })
            }
            Some(Tok::Open) => {
                let inner = self.linear_sum()?;
                if self.bump() != Some(Tok::Close) {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            _ => Err(self.error("expected a number, x, y, pi or '('")),
        }
    }
}

fn frequencies(arg: Linear) -> std::result::Result<(i64, i64), String> {
    if arg.c.abs() > 1e-12 {
        return Err("trig argument must not contain a constant phase".into());
    }
    let to_int = |v: f64, name: &str| -> std::result::Result<i64, String> {
        let k = v / TAU;
        let r = k.round();
        if (k - r).abs() > 1e-9 || r.abs() > 1e9 {
            Err(format!(
                "coefficient of {name} is {v}, not an integer multiple of 2pi; u would not be periodic"
            ))
        } else {
            Ok(r as i64)
        }
    };
    Ok((to_int(arg.a, "x")?, to_int(arg.b, "y")?))
}
