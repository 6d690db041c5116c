//! Continued fractions: expansions of the supported time descriptions,
//! convergents, the growth classes `I(σ)`, and the Khinchin–Lévy diagnostic.
//!
//! Every time is normalized modulo 2 at the level of its expansion: the
//! integer part `a_0` is replaced by `a_0 mod 2` and the tail is kept.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactnum::BigRational;

/// Decimal literals whose reduced denominator is at most this are treated as
/// the exact rationals they spell.
pub const DECIMAL_RATIONAL_MAX_DEN: u64 = 10_000;

/// Class constructions stop once `q_n` needs more bits than this.
pub const CLASS_MAX_BITS: u64 = 1 << 16;

/// Agreement tolerance between the tail max and min of `σ_n` for an `I(σ)` verdict.
pub const SIGMA_TOLERANCE: f64 = 0.1;

/// `ln ρ* = π²/(12 ln 2)`, the almost-sure limit of `(ln q_n)/n`.
pub fn khinchin_levy_constant() -> f64 {
    std::f64::consts::PI.powi(2) / (12.0 * std::f64::consts::LN_2)
}

/// Natural logarithm of a positive big integer.
pub fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Generator for quotients `a_{n+1} = max(1, ⌊q_n^σ⌋)` after a seed prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassRule {
    pub sigma: f64,
    pub seed: Vec<BigInt>,
}

/// A decimal literal `digits / 10^scale`, already reduced modulo 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecimalLiteral {
    digits: BigInt,
    scale: u32,
}

impl DecimalLiteral {
    pub fn parse(text: &str) -> Result<Self> {
        let err = |pos: usize, msg: &str| Error::Parse {
            pos,
            msg: msg.to_string(),
        };
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err(0, "empty decimal literal"));
        }
        for (i, c) in int_part.chars().enumerate() {
            if !c.is_ascii_digit() {
                return Err(err(i, "expected a digit"));
            }
        }
        for (i, c) in frac_part.chars().enumerate() {
            if !c.is_ascii_digit() {
                return Err(err(int_part.len() + 1 + i, "expected a digit"));
            }
        }
        let all: String = format!("{int_part}{frac_part}");
        let digits: BigInt = if all.is_empty() {
            BigInt::zero()
        } else {
            all.parse().map_err(|_| err(0, "bad digits"))?
        };
        let scale = frac_part.len() as u32;
        let period = BigInt::from(2) * BigInt::from(10).pow(scale);
        Ok(Self {
            digits: digits.mod_floor(&period),
            scale,
        })
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn value(&self) -> BigRational {
        BigRational::new(self.digits.clone(), BigInt::from(10).pow(self.scale))
    }

    fn unit(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(10).pow(self.scale))
    }
}

impl fmt::Display for DecimalLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.digits.to_string();
        let scale = self.scale as usize;
        if scale == 0 {
            return write!(f, "{s}");
        }
        let padded = format!("{s:0>width$}", width = scale + 1);
        let (i, fr) = padded.split_at(padded.len() - scale);
        write!(f, "{i}.{fr}")
    }
}

/// Exact description of a time `t ∈ [0, 2)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeSpec {
    /// `p/q`, reduced, with `0 ≤ p/q < 2`.
    Rational { p: BigInt, q: BigInt },
    /// `(a + b√c)/d` with `c > 0` not a square.
    Quadratic {
        a: BigInt,
        b: BigInt,
        c: BigInt,
        d: BigInt,
    },
    Class(ClassRule),
    Decimal(DecimalLiteral),
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.offset + self.pos,
            msg: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn eat(&mut self, lit: &str) -> Result<()> {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.err(format!("expected `{lit}`")))
        }
    }

    fn try_eat(&mut self, lit: &str) -> bool {
        self.eat(lit).is_ok()
    }

    fn int(&mut self) -> Result<BigInt> {
        let rest = self.rest();
        let mut end = 0;
        if rest.starts_with('-') || rest.starts_with('+') {
            end = 1;
        }
        let digits = rest[end..].bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return Err(self.err("expected an integer"));
        }
        end += digits;
        let v = rest[..end]
            .trim_start_matches('+')
            .parse::<BigInt>()
            .map_err(|_| self.err("bad integer"))?;
        self.pos += end;
        Ok(v)
    }

    fn float(&mut self) -> Result<f64> {
        let rest = self.rest();
        let end = rest
            .bytes()
            .take_while(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'-' | b'+'))
            .count();
        let v = rest[..end]
            .parse::<f64>()
            .map_err(|_| self.err("expected a number"))?;
        self.pos += end;
        Ok(v)
    }

    fn done(&self) -> Result<()> {
        if self.pos == self.text.len() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }
}

fn is_square(c: &BigInt) -> bool {
    let r = c.sqrt();
    &r * &r == *c
}

impl TimeSpec {
    /// Parses `rat:p/q`, `quad:(a+b*sqrt(c))/d`, `class:sigma=<v>,seed=<list>`
    /// or `dec:<digits>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (tag, body) = text.split_once(':').ok_or(Error::Parse {
            pos: 0,
            msg: "expected `rat:`, `quad:`, `class:` or `dec:`".into(),
        })?;
        let offset = tag.len() + 1;
        let mut cur = Cursor {
            text: body,
            pos: 0,
            offset,
        };
        match tag {
            "rat" => {
                let p = cur.int()?;
                cur.eat("/")?;
                let q = cur.int()?;
                cur.done()?;
                Self::rational(p, q).map_err(|e| match e {
                    Error::Domain(msg) => Error::Parse { pos: offset, msg },
                    other => other,
                })
            }
            "quad" => {
                cur.eat("(")?;
                let a = cur.int()?;
                let negative = if cur.try_eat("+") {
                    false
                } else if cur.try_eat("-") {
                    true
                } else {
                    return Err(cur.err("expected `+` or `-`"));
                };
                let b = cur.int()?;
                cur.eat("*sqrt(")?;
                let c = cur.int()?;
                cur.eat("))/")?;
                let d = cur.int()?;
                cur.done()?;
                let b = if negative { -b } else { b };
                Self::quadratic(a, b, c, d).map_err(|e| match e {
                    Error::Domain(msg) => Error::Parse { pos: offset, msg },
                    other => other,
                })
            }
            "class" => {
                cur.eat("sigma=")?;
                let sigma = cur.float()?;
                let mut seed = Vec::new();
                if cur.try_eat(",seed=") {
                    loop {
                        seed.push(cur.int()?);
                        if !cur.try_eat(",") {
                            break;
                        }
                    }
                } else {
                    seed = vec![BigInt::zero(), BigInt::one()];
                }
                cur.done()?;
                construct_in_class(sigma, &seed).map_err(|e| match e {
                    Error::Domain(msg) => Error::Parse { pos: offset, msg },
                    other => other,
                })
            }
            "dec" => DecimalLiteral::parse(body)
                .map(TimeSpec::Decimal)
                .map_err(|e| match e {
                    Error::Parse { pos, msg } => Error::Parse {
                        pos: pos + offset,
                        msg,
                    },
                    other => other,
                }),
            _ => Err(Error::Parse {
                pos: 0,
                msg: format!("unknown time kind `{tag}`"),
            }),
        }
    }

    /// `p/q` reduced to lowest terms and into `[0, 2)`.
    pub fn rational(p: impl Into<BigInt>, q: impl Into<BigInt>) -> Result<Self> {
        let (p, q) = (p.into(), q.into());
        if q.is_zero() {
            return Err(Error::Domain("zero denominator".into()));
        }
        let r = BigRational::new(p, q);
        let two = BigRational::from_integer(BigInt::from(2));
        let r = &r - &two * BigRational::from_integer((&r / &two).floor().to_integer());
        Ok(TimeSpec::Rational {
            p: r.numer().clone(),
            q: r.denom().clone(),
        })
    }

    pub fn quadratic(
        a: impl Into<BigInt>,
        b: impl Into<BigInt>,
        c: impl Into<BigInt>,
        d: impl Into<BigInt>,
    ) -> Result<Self> {
        let (a, b, c, d) = (a.into(), b.into(), c.into(), d.into());
        if !c.is_positive() || is_square(&c) {
            return Err(Error::Domain(format!("sqrt({c}) is not irrational")));
        }
        if b.is_zero() || d.is_zero() {
            return Err(Error::Domain("b and d must be non-zero".into()));
        }
        Ok(TimeSpec::Quadratic { a, b, c, d })
    }

    /// The rational this time is routed as, if any: rationals, and decimal
    /// literals with a small reduced denominator.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            TimeSpec::Rational { p, q } => Some(BigRational::new(p.clone(), q.clone())),
            TimeSpec::Decimal(d) => {
                let v = d.value();
                (v.denom() <= &BigInt::from(DECIMAL_RATIONAL_MAX_DEN)).then_some(v)
            }
            _ => None,
        }
    }

    /// The exact value when the description spells one out.
    pub fn exact_value(&self) -> Option<BigRational> {
        match self {
            TimeSpec::Rational { p, q } => Some(BigRational::new(p.clone(), q.clone())),
            TimeSpec::Decimal(d) => Some(d.value()),
            _ => None,
        }
    }

    /// First `depth` partial quotients (fewer for finite or exhausted data).
    pub fn expansion(&self, depth: usize) -> Result<CFExpansion> {
        match self {
            TimeSpec::Rational { p, q } => {
                let mut e = expand_canonical(p, q);
                e.cap(depth);
                Ok(e)
            }
            TimeSpec::Quadratic { a, b, c, d } => Ok(quadratic_expansion(a, b, c, d, depth)),
            TimeSpec::Class(rule) => Ok(class_expansion(rule, depth)),
            TimeSpec::Decimal(lit) => Ok(cf_of_real(lit, depth)),
        }
    }

    /// Whether the partial quotients are known to be bounded.
    pub fn has_bounded_quotients(&self) -> bool {
        match self {
            TimeSpec::Quadratic { .. } => true,
            TimeSpec::Class(rule) => rule.sigma == 0.0,
            _ => false,
        }
    }

    /// A file-name friendly label.
    pub fn slug(&self) -> String {
        self.to_string()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
            .collect()
    }
}

impl fmt::Display for TimeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeSpec::Rational { p, q } => write!(f, "rat:{p}/{q}"),
            TimeSpec::Quadratic { a, b, c, d } => {
                let sign = if b.is_negative() { '-' } else { '+' };
                write!(f, "quad:({a}{sign}{}*sqrt({c}))/{d}", b.abs())
            }
            TimeSpec::Class(rule) => {
                let seed: Vec<String> = rule.seed.iter().map(ToString::to_string).collect();
                write!(f, "class:sigma={},seed={}", rule.sigma, seed.join(","))
            }
            TimeSpec::Decimal(d) => write!(f, "dec:{d}"),
        }
    }
}

impl std::str::FromStr for TimeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TimeSpec::parse(s)
    }
}

/// Partial quotients with their convergents `p_k/q_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CFExpansion {
    quotients: Vec<BigInt>,
    convergents: Vec<(BigInt, BigInt)>,
    finite: bool,
    truncated: bool,
}

impl CFExpansion {
    fn from_quotients(quotients: Vec<BigInt>, finite: bool, truncated: bool) -> Self {
        let convergents = convergents_of(&quotients);
        Self {
            quotients,
            convergents,
            finite,
            truncated,
        }
    }

    pub fn quotients(&self) -> &[BigInt] {
        &self.quotients
    }

    pub fn convergents(&self) -> &[(BigInt, BigInt)] {
        &self.convergents
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }

    /// The expansion is the complete expansion of a rational.
    pub fn is_finite(&self) -> bool {
        self.finite
    }

    /// The data ran out before the requested depth could be certified.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// `(p_{k-1}, q_{k-1})`, with `(p_{-1}, q_{-1}) = (1, 0)`.
    pub fn previous(&self, k: usize) -> (BigInt, BigInt) {
        if k == 0 {
            (BigInt::one(), BigInt::zero())
        } else {
            self.convergents[k - 1].clone()
        }
    }

    /// `p_k q_{k-1} − p_{k-1} q_k`.
    pub fn determinant(&self, k: usize) -> BigInt {
        let (p, q) = &self.convergents[k];
        let (pp, qp) = self.previous(k);
        p * qp - pp * q
    }

    pub fn value(&self) -> Option<BigRational> {
        self.convergents
            .last()
            .map(|(p, q)| BigRational::new(p.clone(), q.clone()))
    }

    /// Denominators `q_k`.
    pub fn denominators(&self) -> impl Iterator<Item = &BigInt> {
        self.convergents.iter().map(|(_, q)| q)
    }

    fn cap(&mut self, depth: usize) {
        if self.quotients.len() > depth {
            self.quotients.truncate(depth);
            self.convergents.truncate(depth);
            self.finite = false;
        }
    }
}

/// Convergents via `p_{k+1} = a_{k+1} p_k + p_{k-1}` and the same for `q`,
/// from `p_{-1} = 1, q_{-1} = 0`.
pub fn convergents_of(quotients: &[BigInt]) -> Vec<(BigInt, BigInt)> {
    let mut out = Vec::with_capacity(quotients.len());
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    for (k, a) in quotients.iter().enumerate() {
        let (pn, qn) = if k == 0 {
            (a.clone(), BigInt::one())
        } else {
            (a * &p + &p_prev, a * &q + &q_prev)
        };
        if k > 0 {
            p_prev = p;
            q_prev = q;
        }
        p = pn;
        q = qn;
        out.push((p.clone(), q.clone()));
    }
    out
}

/// Which index the last quotient `a_n` of a rational expansion carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Parity {
    Even,
    Odd,
}

fn euclid(p: &BigInt, q: &BigInt) -> Vec<BigInt> {
    let (mut a, mut b) = (p.clone(), q.clone());
    let mut out = Vec::new();
    while !b.is_zero() {
        let (d, r) = a.div_mod_floor(&b);
        out.push(d);
        a = b;
        b = r;
    }
    out
}

fn expand_canonical(p: &BigInt, q: &BigInt) -> CFExpansion {
    CFExpansion::from_quotients(euclid(p, q), true, false)
}

/// Finite expansion `[a_0; …, a_n]` of `p/q` whose last index has the
/// requested parity.
///
/// The two expansions of a rational differ by splitting `a_n` into
/// `a_n − 1, 1` or merging a trailing `1` into `a_{n−1}`.
pub fn expand_rational(p: impl Into<BigInt>, q: impl Into<BigInt>, parity: Parity) -> Result<CFExpansion> {
    let (p, q) = (p.into(), q.into());
    if !q.is_positive() {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    if !p.gcd(&q).is_one() {
        return Err(Error::Domain(format!("{p}/{q} is not reduced")));
    }
    if p.is_negative() || p >= &q * 2u32 {
        return Err(Error::Domain(format!("{p}/{q} is outside [0, 2)")));
    }
    let mut a = euclid(&p, &q);
    let n = a.len() - 1;
    let have = if n.is_multiple_of(2) { Parity::Even } else { Parity::Odd };
    if have != parity {
        let last = a.pop().expect("non-empty");
        if n == 0 || !last.is_one() {
            a.push(last - 1u32);
            a.push(BigInt::one());
        } else {
            *a.last_mut().expect("n >= 1") += 1u32;
        }
    }
    Ok(CFExpansion::from_quotients(a, true, false))
}

fn quadratic_expansion(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt, depth: usize) -> CFExpansion {
    // (P + sqrt(D)) / Q with Q | D - P².
    let (mut p, mut q) = if b.is_positive() {
        (a.clone(), d.clone())
    } else {
        (-a, -d)
    };
    let mut disc = b * b * c;
    if !(&disc - &p * &p).is_multiple_of(&q) {
        let m = q.abs();
        p *= &m;
        disc *= &m * &m;
        q *= &m;
    }
    let s = disc.sqrt();
    let mut out = Vec::with_capacity(depth);
    for k in 0..depth {
        let a_k = if q.is_positive() {
            (&p + &s).div_floor(&q)
        } else {
            -((&p + &s).div_floor(&-&q)) - 1
        };
        let p_next = &a_k * &q - &p;
        let q_next = (&disc - &p_next * &p_next) / &q;
        out.push(if k == 0 { a_k.mod_floor(&BigInt::from(2)) } else { a_k });
        p = p_next;
        q = q_next;
    }
    CFExpansion::from_quotients(out, false, false)
}

/// `⌊q^σ⌋` for `q ≥ 1`, exact for integral σ.
fn floor_pow(q: &BigInt, sigma: f64) -> BigInt {
    if sigma == 0.0 {
        return BigInt::one();
    }
    if sigma.fract() == 0.0 && sigma <= 64.0 {
        return q.pow(sigma as u32);
    }
    let log2 = ln_big(q) / std::f64::consts::LN_2 * sigma;
    if log2 < 52.0 {
        return BigInt::from(2f64.powf(log2).floor() as u64);
    }
    let shift = (log2 - 52.0).floor();
    let mant = 2f64.powf(log2 - shift).floor() as u64;
    BigInt::from(mant) << (shift as u64)
}

fn class_expansion(rule: &ClassRule, depth: usize) -> CFExpansion {
    let mut quotients: Vec<BigInt> = rule.seed.iter().take(depth).cloned().collect();
    if let Some(a0) = quotients.first_mut() {
        *a0 = a0.mod_floor(&BigInt::from(2));
    }
    let mut conv = convergents_of(&quotients);
    let mut truncated = false;
    while quotients.len() < depth {
        let (p, q) = conv.last().expect("seed is non-empty").clone();
        if q.bits() > CLASS_MAX_BITS {
            truncated = true;
            break;
        }
        let a = floor_pow(&q, rule.sigma).max(BigInt::one());
        let (pp, qp) = if conv.len() >= 2 {
            conv[conv.len() - 2].clone()
        } else {
            (BigInt::one(), BigInt::zero())
        };
        conv.push((&a * &p + pp, &a * &q + qp));
        quotients.push(a);
    }
    CFExpansion {
        quotients,
        convergents: conv,
        finite: false,
        truncated,
    }
}

/// A time in `I(σ)` built from `a_{n+1} = max(1, ⌊q_n^σ⌋)` after `seed`.
pub fn construct_in_class(sigma: f64, seed: &[BigInt]) -> Result<TimeSpec> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Domain(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if seed.is_empty() {
        return Err(Error::Domain("seed needs at least a_0".into()));
    }
    if seed.iter().skip(1).any(|a| !a.is_positive()) {
        return Err(Error::Domain("seed quotients after a_0 must be >= 1".into()));
    }
    let mut seed = seed.to_vec();
    seed[0] = seed[0].mod_floor(&BigInt::from(2));
    Ok(TimeSpec::Class(ClassRule { sigma, seed }))
}

/// Quotients of the real number a decimal literal stands for.
///
/// A quotient is emitted only when the literal and its two neighbours one unit
/// in the last digit away all agree on it. Literals with a small reduced
/// denominator are exact rationals and expand completely.
pub fn cf_of_real(lit: &DecimalLiteral, depth: usize) -> CFExpansion {
    let value = lit.value();
    if value.denom() <= &BigInt::from(DECIMAL_RATIONAL_MAX_DEN) {
        let mut e = expand_canonical(value.numer(), value.denom());
        e.cap(depth);
        return e;
    }
    let u = lit.unit();
    let mut points = [&value - &u, value.clone(), &value + &u];
    let mut out = Vec::new();
    let mut truncated = false;
    while out.len() < depth {
        let a: Vec<BigInt> = points.iter().map(|x| x.floor().to_integer()).collect();
        if a[0] != a[1] || a[1] != a[2] {
            truncated = true;
            break;
        }
        let quotient = a[1].clone();
        let rest: Vec<BigRational> = points
            .iter()
            .map(|x| x - BigRational::from_integer(quotient.clone()))
            .collect();
        out.push(if out.is_empty() {
            quotient.mod_floor(&BigInt::from(2))
        } else {
            quotient
        });
        if rest.iter().any(Zero::is_zero) {
            truncated = out.len() < depth;
            break;
        }
        for (pt, r) in points.iter_mut().zip(rest) {
            *pt = r.recip();
        }
        // The map x -> 1/x reverses order; keep points sorted.
        points.swap(0, 2);
    }
    CFExpansion::from_quotients(out, false, truncated)
}

/// Verdict on the growth class of `q_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "sigma")]
pub enum SigmaClass {
    /// `q_{n+1} ≤ C q_n^{1+σ}` eventually, on the observed range.
    AtMost(f64),
    /// `q_{n+1} ≥ c q_n^{1+σ}` along the observed tail.
    AtLeast(f64),
    /// Both, with tail estimates agreeing within [`SIGMA_TOLERANCE`].
    Exactly(f64),
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaEstimate {
    /// `(n, σ_n)` with `σ_n = ln q_{n+1}/ln q_n − 1`, for `q_n ≥ 2`.
    pub per_n: Vec<(usize, f64)>,
    pub limsup_est: f64,
    pub liminf_est: f64,
    pub verdict: SigmaClass,
}

/// `σ_n` estimates over the window of indices `n` and a class verdict.
pub fn classify_sigma(exp: &CFExpansion, window: std::ops::Range<usize>) -> SigmaEstimate {
    let q: Vec<&BigInt> = exp.denominators().collect();
    let two = BigInt::from(2);
    let per_n: Vec<(usize, f64)> = (0..q.len().saturating_sub(1))
        .filter(|&n| q[n] >= &two)
        .map(|n| (n, ln_big(q[n + 1]) / ln_big(q[n]) - 1.0))
        .collect();
    let tail: Vec<f64> = per_n
        .iter()
        .filter(|(n, _)| window.contains(n))
        .map(|&(_, s)| s)
        .collect();
    let nan = SigmaEstimate {
        per_n: per_n.clone(),
        limsup_est: f64::NAN,
        liminf_est: f64::NAN,
        verdict: SigmaClass::Indeterminate,
    };
    if exp.is_finite() || tail.len() < 4 {
        return nan;
    }
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let verdict = if hi - lo <= SIGMA_TOLERANCE {
        SigmaClass::Exactly(0.5 * (hi + lo))
    } else if tail.last() == Some(&hi) {
        SigmaClass::AtLeast(hi)
    } else {
        SigmaClass::AtMost(hi)
    };
    SigmaEstimate {
        per_n,
        limsup_est: hi,
        liminf_est: lo,
        verdict,
    }
}

/// Window covering the last half of the available `σ_n`, at least four long.
pub fn default_window(exp: &CFExpansion) -> std::ops::Range<usize> {
    let n = exp.len().saturating_sub(1);
    let start = (n / 2).min(n.saturating_sub(4));
    start..n
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhinchinLevy {
    /// `(n, (ln q_n)/n)` for `n ≥ 1`.
    pub points: Vec<(usize, f64)>,
    /// `ln ρ* = π²/(12 ln 2)`.
    pub reference: f64,
}

pub fn khinchin_levy_diagnostic(exp: &CFExpansion) -> KhinchinLevy {
    let points = exp
        .denominators()
        .enumerate()
        .skip(1)
        .map(|(n, q)| (n, ln_big(q) / n as f64))
        .collect();
    KhinchinLevy {
        points,
        reference: khinchin_levy_constant(),
    }
}

/// The `(p_n, q_n)` among the convergents minimizing `scale/√q + √q`.
pub fn best_convergent_for_scale(exp: &CFExpansion, scale: f64) -> Option<(BigInt, BigInt)> {
    exp.convergents()
        .iter()
        .min_by(|a, b| {
            let cost = |q: &BigInt| {
                let s = ln_big(q).mul_add(0.5, 0.0).exp();
                scale / s + s
            };
            cost(&a.1).total_cmp(&cost(&b.1))
        })
        .cloned()
}
