//! Slowly varying volume profiles υ(λ).
//!
//! A profile is a finite sum of a constant and terms drawn from a small
//! catalog: monomials in iterated logarithms, exponentials of such
//! monomials with exponents in (0, 1), and `sin(log λ)`. Derivatives up to
//! third order come from exact Taylor-jet propagation through the closed
//! form, never from differencing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(log_depth λ)^power`, where `log_1 = log`, `log_2 = log log`, ...
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogFactor {
    pub depth: u32,
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    /// `coeff · Π (log_k λ)^{p_k}`
    LogMonomial { coeff: f64, factors: Vec<LogFactor> },
    /// `coeff · exp(Π (log_k λ)^{α_k})` with every `0 < α_k < 1`
    ExpLog { coeff: f64, factors: Vec<LogFactor> },
    /// `coeff · sin(log λ)`
    SinLog { coeff: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    PowerOfLog,
    IteratedLog,
    Combination,
    ExpOfLogPowers,
    AffineLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SlowVaryingSpec {
    constant: f64,
    terms: Vec<Term>,
    lambda_min: f64,
}

/// υ and its first three derivatives at one λ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SvfValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Truncated Taylor coefficients in the derivative basis: (f, f', f'', f''').
#[derive(Clone, Copy, Debug)]
struct Jet3([f64; 4]);

impl Jet3 {
    fn constant(c: f64) -> Self {
        Jet3([c, 0.0, 0.0, 0.0])
    }

    fn variable(x: f64) -> Self {
        Jet3([x, 1.0, 0.0, 0.0])
    }

    fn scale(self, c: f64) -> Self {
        Jet3(self.0.map(|v| v * c))
    }

    fn add(self, o: Self) -> Self {
        let mut r = self.0;
        for (a, b) in r.iter_mut().zip(o.0) {
            *a += b;
        }
        Jet3(r)
    }

    fn mul(self, o: Self) -> Self {
        let [u0, u1, u2, u3] = self.0;
        let [v0, v1, v2, v3] = o.0;
        Jet3([
            u0 * v0,
            u1 * v0 + u0 * v1,
            u2 * v0 + 2.0 * u1 * v1 + u0 * v2,
            u3 * v0 + 3.0 * u2 * v1 + 3.0 * u1 * v2 + u0 * v3,
        ])
    }

    /// Chain rule: `g ∘ self` given g and its derivatives at `self.0[0]`.
    fn compose(self, g: [f64; 4]) -> Self {
        let [_, u1, u2, u3] = self.0;
        Jet3([
            g[0],
            g[1] * u1,
            g[2] * u1 * u1 + g[1] * u2,
            g[3] * u1 * u1 * u1 + 3.0 * g[2] * u1 * u2 + g[1] * u3,
        ])
    }

    fn ln(self) -> Self {
        let x = self.0[0];
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    fn powf(self, p: f64) -> Self {
        let x = self.0[0];
        self.compose([
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        ])
    }

    fn exp(self) -> Self {
        let e = self.0[0].exp();
        self.compose([e; 4])
    }

    fn sin(self) -> Self {
        let (s, c) = self.0[0].sin_cos();
        self.compose([s, c, -s, -c])
    }
}

fn log_monomial(logs: &[Jet3], factors: &[LogFactor]) -> Jet3 {
    factors.iter().fold(Jet3::constant(1.0), |acc, f| {
        let base = logs[f.depth as usize - 1];
        let p = if f.power == 1.0 { base } else { base.powf(f.power) };
        acc.mul(p)
    })
}

/// `exp^{k}(x)`, used to place default thresholds where every iterated log is positive.
fn iterated_exp(x: f64, k: u32) -> f64 {
    (0..k).fold(x, |v, _| v.exp())
}

impl SlowVaryingSpec {
    pub fn new(constant: f64, terms: Vec<Term>) -> Result<Self> {
        let mut s = SlowVaryingSpec { constant, terms, lambda_min: 0.0 };
        s.lambda_min = s.default_lambda_min();
        s.validate()?;
        Ok(s)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(c, Vec::new())
    }

    pub fn log() -> Self {
        Self::new(0.0, vec![Term::LogMonomial { coeff: 1.0, factors: vec![LogFactor { depth: 1, power: 1.0 }] }])
            .expect("log is a valid profile")
    }

    pub fn with_lambda_min(mut self, lambda_min: f64) -> Result<Self> {
        self.lambda_min = lambda_min;
        self.validate()?;
        Ok(self)
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    fn max_depth(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| match t {
                Term::LogMonomial { factors, .. } | Term::ExpLog { factors, .. } => {
                    factors.iter().map(|f| f.depth).max().unwrap_or(1)
                }
                Term::SinLog { .. } => 1,
            })
            .max()
            .unwrap_or(1)
    }

    fn default_lambda_min(&self) -> f64 {
        // log_k > 0 needs λ > exp^{k-1}(1); the extra margin keeps ratios tame.
        iterated_exp(2.0, self.max_depth().max(2) - 1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 1.0) || !self.lambda_min.is_finite() {
            return Err(Error::Config(format!("lambda_min must be finite and > 1, got {}", self.lambda_min)));
        }
        let first_positive = iterated_exp(1.0, self.max_depth() - 1);
        if self.lambda_min <= first_positive {
            return Err(Error::Config(format!(
                "lambda_min = {} leaves log_{} non-positive",
                self.lambda_min,
                self.max_depth()
            )));
        }
        for t in &self.terms {
            match t {
                Term::LogMonomial { coeff, factors } | Term::ExpLog { coeff, factors } => {
                    if !coeff.is_finite() || factors.is_empty() {
                        return Err(Error::Config("malformed term".into()));
                    }
                    if factors.iter().any(|f| f.depth == 0 || !f.power.is_finite()) {
                        return Err(Error::Config("iterated-log depth must be >= 1".into()));
                    }
                    if matches!(t, Term::ExpLog { .. }) && factors.iter().any(|f| !(f.power > 0.0 && f.power < 1.0)) {
                        return Err(Error::Config("exp-of-log exponents must lie in (0, 1)".into()));
                    }
                }
                Term::SinLog { coeff } => {
                    if !coeff.is_finite() {
                        return Err(Error::Config("malformed sin term".into()));
                    }
                }
            }
        }
        // Positivity on a logarithmic sweep of the domain.
        let t0 = self.lambda_min.ln();
        for j in 0..=400 {
            let lambda = (t0 + (700.0 - t0) * j as f64 / 400.0).exp();
            let v = self.jet(lambda).0[0];
            if !(v > 0.0) {
                return Err(Error::Config(format!("profile {self} is not positive at lambda = {lambda:e}")));
            }
        }
        Ok(())
    }

    fn jet(&self, lambda: f64) -> Jet3 {
        let depth = self.max_depth() as usize;
        let mut logs = Vec::with_capacity(depth);
        let mut cur = Jet3::variable(lambda);
        for _ in 0..depth {
            cur = cur.ln();
            logs.push(cur);
        }
        let mut acc = Jet3::constant(self.constant);
        for t in &self.terms {
            let j = match t {
                Term::LogMonomial { coeff, factors } => log_monomial(&logs, factors).scale(*coeff),
                Term::ExpLog { coeff, factors } => log_monomial(&logs, factors).exp().scale(*coeff),
                Term::SinLog { coeff } => logs[0].sin().scale(*coeff),
            };
            acc = acc.add(j);
        }
        acc
    }

    pub fn family(&self) -> Family {
        match self.terms.as_slice() {
            [] => Family::Constant,
            _ if self.terms.iter().any(|t| matches!(t, Term::SinLog { .. })) => Family::AffineLog,
            [Term::ExpLog { .. }] if self.constant == 0.0 => Family::ExpOfLogPowers,
            [Term::LogMonomial { factors, .. }] if self.constant == 0.0 && factors.len() == 1 => {
                if factors[0].depth == 1 {
                    Family::PowerOfLog
                } else {
                    Family::IteratedLog
                }
            }
            _ => Family::Combination,
        }
    }

    /// True when υ′ ≥ 0 at every point of a dense logarithmic sweep of the domain.
    pub fn is_non_decreasing(&self) -> bool {
        let t0 = self.lambda_min.ln();
        (0..=4000).all(|j| {
            let lambda = (t0 + (700.0 - t0) * j as f64 / 4000.0).exp();
            self.jet(lambda).0[1] >= 0.0
        })
    }

    /// The sampled catalog used by the property checks.
    pub fn catalog() -> Vec<SlowVaryingSpec> {
        ["log", "log^2", "loglog", "7*log+3", "3*log+loglog", "log*loglog", "exp(log^0.5)", "2*log+sin"]
            .iter()
            .map(|s| s.parse().expect("catalog entries parse"))
            .collect()
    }
}

fn check_domain(spec: &SlowVaryingSpec, lambda: f64) -> Result<()> {
    // a few ulps of slack so that e.g. `E * E` passes a threshold stored as `exp(2)`
    if !(lambda >= spec.lambda_min * (1.0 - 4.0 * f64::EPSILON)) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda = {lambda} is below the validity threshold {} of {spec}",
            spec.lambda_min
        )));
    }
    Ok(())
}

pub fn eval_svf(spec: &SlowVaryingSpec, lambda: f64) -> Result<SvfValue> {
    check_domain(spec, lambda)?;
    let [value, d1, d2, d3] = spec.jet(lambda).0;
    Ok(SvfValue { value, d1, d2, d3 })
}

/// Returns `(|υ(aλ)/υ(λ) − 1|, λυ′(λ)/υ(λ))`.
pub fn slow_variation_defect(spec: &SlowVaryingSpec, a: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("scale factor a must be positive, got {a}")));
    }
    let base = eval_svf(spec, lambda)?;
    let scaled = eval_svf(spec, a * lambda)?;
    let defect = (scaled.value / base.value - 1.0).abs();
    let lamperti = lambda * base.d1 / base.value;
    Ok((defect, lamperti))
}

/// `λ^m υ^{(1+m)}(λ) / υ′(λ)` for `m ∈ {1, 2}`.
pub fn dehaan_ratio(spec: &SlowVaryingSpec, lambda: f64, m: u32) -> Result<f64> {
    let v = eval_svf(spec, lambda)?;
    if spec.terms.is_empty() || v.d1 == 0.0 {
        return Err(Error::DegenerateDerivative(format!("υ′ vanishes for {spec} at lambda = {lambda}")));
    }
    match m {
        1 => Ok(lambda * v.d2 / v.d1),
        2 => Ok(lambda * lambda * v.d3 / v.d1),
        _ => Err(Error::Domain(format!("de Haan order must be 1 or 2, got {m}"))),
    }
}

// ---------------------------------------------------------------------------
// text grammar

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn fmt_factors(factors: &[LogFactor]) -> String {
    let mut out = String::new();
    for (i, f) in factors.iter().enumerate() {
        let (op, p) = if i > 0 && f.power < 0.0 { ("/", -f.power) } else { (if i > 0 { "*" } else { "" }, f.power) };
        out.push_str(op);
        let name = match f.depth {
            1 => "log".to_string(),
            2 => "loglog".to_string(),
            3 => "logloglog".to_string(),
            d => format!("log_{d}"),
        };
        out.push_str(&name);
        if p != 1.0 {
            out.push('^');
            out.push_str(&fmt_num(p));
        }
    }
    out
}

impl fmt::Display for SlowVaryingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<(f64, String)> = Vec::new();
        for t in &self.terms {
            match t {
                Term::LogMonomial { coeff, factors } => parts.push((*coeff, fmt_factors(factors))),
                Term::ExpLog { coeff, factors } => parts.push((*coeff, format!("exp({})", fmt_factors(factors)))),
                Term::SinLog { coeff } => parts.push((*coeff, "sin".into())),
            }
        }
        let mut out = String::new();
        for (i, (c, body)) in parts.iter().enumerate() {
            let mag = c.abs();
            if i == 0 {
                if *c < 0.0 {
                    out.push('-');
                }
            } else {
                out.push_str(if *c < 0.0 { "-" } else { "+" });
            }
            if mag != 1.0 {
                out.push_str(&fmt_num(mag));
                out.push('*');
            }
            out.push_str(body);
        }
        if self.constant != 0.0 || parts.is_empty() {
            if !parts.is_empty() {
                out.push_str(if self.constant < 0.0 { "-" } else { "+" });
                out.push_str(&fmt_num(self.constant.abs()));
            } else {
                out.push_str(&fmt_num(self.constant));
            }
        }
        f.write_str(&out)
    }
}

impl From<SlowVaryingSpec> for String {
    fn from(s: SlowVaryingSpec) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SlowVaryingSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

enum Body {
    Monomial(Vec<LogFactor>),
    Exp(Vec<LogFactor>),
    Sin,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(w.as_bytes()) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.src.get(self.pos), Some(b'-' | b'+')) {
            self.pos += 1;
        }
        while let Some(c) = self.src.get(self.pos) {
            let exp_sign = matches!(c, b'-' | b'+') && matches!(self.src.get(self.pos - 1), Some(b'e' | b'E'));
            if c.is_ascii_digit() || *c == b'.' || *c == b'e' || *c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.err("expected a number")
            }
        }
    }

    fn log_factor(&mut self) -> Result<LogFactor> {
        self.skip_ws();
        if !self.src[self.pos..].starts_with(b"log") {
            return self.err("expected log, loglog or log_k");
        }
        let depth = if self.eat_word("log_") {
            let start = self.pos;
            while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                self.pos += 1;
            }
            match std::str::from_utf8(&self.src[start..self.pos]).ok().and_then(|s| s.parse::<u32>().ok()) {
                Some(d) if d >= 1 => d,
                _ => return self.err("expected a positive depth after log_"),
            }
        } else {
            let mut d = 0;
            while self.eat_word("log") {
                d += 1;
            }
            d
        };
        let power = if self.eat(b'^') { self.number()? } else { 1.0 };
        Ok(LogFactor { depth, power })
    }

    fn product(&mut self) -> Result<Vec<LogFactor>> {
        let mut out = vec![self.log_factor()?];
        loop {
            let save = self.pos;
            if self.eat(b'*') {
                out.push(self.log_factor()?);
            } else if self.eat(b'/') {
                let f = self.log_factor()?;
                out.push(LogFactor { depth: f.depth, power: -f.power });
            } else {
                self.pos = save;
                return Ok(out);
            }
        }
    }

    fn body(&mut self) -> Result<Body> {
        if self.eat_word("exp") {
            if !self.eat(b'(') {
                return self.err("expected ( after exp");
            }
            let f = self.product()?;
            if !self.eat(b')') {
                return self.err("expected )");
            }
            Ok(Body::Exp(f))
        } else if self.eat_word("sin") {
            if self.eat(b'(')
                && !(self.eat_word("log") && self.eat(b')')) {
                    return self.err("only sin(log) is supported");
                }
            Ok(Body::Sin)
        } else {
            Ok(Body::Monomial(self.product()?))
        }
    }

    /// Returns `(coefficient, body)`; a bare number has no body.
    fn term(&mut self, sign: f64) -> Result<(f64, Option<Body>)> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let c = self.number()?;
                if self.eat(b'*') {
                    Ok((sign * c, Some(self.body()?)))
                } else {
                    Ok((sign * c, None))
                }
            }
            Some(_) => Ok((sign, Some(self.body()?))),
            None => self.err("unexpected end of input"),
        }
    }

    fn spec(&mut self) -> Result<SlowVaryingSpec> {
        let mut constant = 0.0;
        let mut terms = Vec::new();
        let mut sign = if self.eat(b'-') { -1.0 } else { 1.0 };
        loop {
            let (c, body) = self.term(sign)?;
            match body {
                None => constant += c,
                Some(Body::Monomial(factors)) => terms.push(Term::LogMonomial { coeff: c, factors }),
                Some(Body::Exp(factors)) => terms.push(Term::ExpLog { coeff: c, factors }),
                Some(Body::Sin) => terms.push(Term::SinLog { coeff: c }),
            }
            if self.eat(b'+') {
                sign = 1.0;
            } else if self.eat(b'-') {
                sign = -1.0;
            } else if self.peek().is_none() {
                break;
            } else {
                return self.err("unexpected character");
            }
        }
        SlowVaryingSpec::new(constant, terms)
    }
}

impl FromStr for SlowVaryingSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Parser { src: s.as_bytes(), pos: 0 }.spec()
    }
}
