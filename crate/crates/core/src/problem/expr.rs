//! Closed vocabulary of space–time data functions.
//!
//! A [`SpaceTimeFn`] is a finite sum of monomials `c · x^a · y^b · t^e` with
//! `e ∈ {0, 1}`. That covers constants, linear ramps in time and products of
//! coordinate polynomials, which is all the shipped scenarios need, while
//! keeping evaluation bit-reproducible.
//!
//! The textual form accepted by [`SpaceTimeFn::parse`] is a `+`/`-` separated
//! list of terms, each term a `*`-separated product of a number and the
//! symbols `x`, `y`, `t` with optional integer powers: `1`, `1 - 0.5*t`,
//! `2*x^2*y`, `-3e-2*x*t`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot parse expression `{input}`: {reason}")]
pub struct ExprError {
    pub input: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub x_pow: u32,
    pub y_pow: u32,
    /// Either 0 or 1.
    pub t_pow: u32,
}

impl Monomial {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        let mut v = self.coeff;
        if self.x_pow > 0 {
            v *= x.powi(self.x_pow as i32);
        }
        if self.y_pow > 0 {
            v *= y.powi(self.y_pow as i32);
        }
        if self.t_pow == 1 {
            v *= t;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpaceTimeFn {
    terms: Vec<Monomial>,
}

impl SpaceTimeFn {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Self {
            terms: vec![Monomial {
                coeff: c,
                x_pow: 0,
                y_pow: 0,
                t_pow: 0,
            }],
        }
    }

    /// `base + rate * t`
    pub fn ramp(base: f64, rate: f64) -> Self {
        let mut f = Self::constant(base);
        if rate != 0.0 {
            f.terms.push(Monomial {
                coeff: rate,
                x_pow: 0,
                y_pow: 0,
                t_pow: 1,
            });
        }
        f
    }

    pub fn from_terms(terms: Vec<Monomial>) -> Self {
        Self {
            terms: terms.into_iter().filter(|m| m.coeff != 0.0).collect(),
        }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|m| m.t_pow == 0)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.terms.iter().map(|m| m.eval(x, y, t)).sum()
    }

    /// Partial derivative in time.
    pub fn dt(&self) -> SpaceTimeFn {
        SpaceTimeFn {
            terms: self
                .terms
                .iter()
                .filter(|m| m.t_pow == 1)
                .map(|m| Monomial { t_pow: 0, ..*m })
                .collect(),
        }
    }

    pub fn parse(input: &str) -> Result<Self, ExprError> {
        let err = |reason: &str| ExprError {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err("empty expression"));
        }

        // Split into signed terms; a sign directly after an exponent marker
        // belongs to the number (`1e-3`).
        let bytes = compact.as_bytes();
        let mut pieces: Vec<(f64, &str)> = Vec::new();
        let mut start = 0;
        let mut sign = 1.0;
        let mut i = 0;
        if bytes[0] == b'+' || bytes[0] == b'-' {
            sign = if bytes[0] == b'-' { -1.0 } else { 1.0 };
            start = 1;
            i = 1;
        }
        while i < bytes.len() {
            let c = bytes[i];
            if (c == b'+' || c == b'-') && i > start {
                let prev = bytes[i - 1];
                let is_exponent =
                    (prev == b'e' || prev == b'E') && i >= 2 && (bytes[i - 2].is_ascii_digit() || bytes[i - 2] == b'.');
                if !is_exponent {
                    pieces.push((sign, &compact[start..i]));
                    sign = if c == b'-' { -1.0 } else { 1.0 };
                    start = i + 1;
                }
            }
            i += 1;
        }
        pieces.push((sign, &compact[start..]));

        let mut terms = Vec::with_capacity(pieces.len());
        for (sign, piece) in pieces {
            if piece.is_empty() {
                return Err(err("dangling sign"));
            }
            let mut m = Monomial {
                coeff: sign,
                x_pow: 0,
                y_pow: 0,
                t_pow: 0,
            };
            for factor in piece.split('*') {
                if factor.is_empty() {
                    return Err(err("empty factor"));
                }
                let (base, pow) = match factor.split_once('^') {
                    Some((b, p)) => {
                        let p: u32 = p.parse().map_err(|_| err(&format!("bad exponent in `{factor}`")))?;
                        (b, p)
                    }
                    None => (factor, 1),
                };
                match base {
                    "x" => m.x_pow += pow,
                    "y" => m.y_pow += pow,
                    "t" => m.t_pow += pow,
                    num => {
                        let v: f64 = num.parse().map_err(|_| err(&format!("unknown factor `{num}`")))?;
                        if !v.is_finite() {
                            return Err(err("non-finite constant"));
                        }
                        m.coeff *= v.powi(pow as i32);
                    }
                }
            }
            if m.t_pow > 1 {
                return Err(err("time enters at most linearly"));
            }
            terms.push(m);
        }
        Ok(Self::from_terms(terms))
    }
}

impl fmt::Display for SpaceTimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, m) in self.terms.iter().enumerate() {
            let c = if i == 0 {
                m.coeff
            } else if m.coeff < 0.0 {
                write!(f, " - ")?;
                -m.coeff
            } else {
                write!(f, " + ")?;
                m.coeff
            };
            // `{:?}` on f64 is the shortest round-trip representation.
            write!(f, "{c:?}")?;
            for (sym, p) in [("x", m.x_pow), ("y", m.y_pow), ("t", m.t_pow)] {
                match p {
                    0 => {}
                    1 => write!(f, "*{sym}")?,
                    p => write!(f, "*{sym}^{p}")?,
                }
            }
        }
        Ok(())
    }
}

impl Serialize for SpaceTimeFn {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SpaceTimeFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(SpaceTimeFn::constant(v)),
            Raw::Text(s) => SpaceTimeFn::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}
