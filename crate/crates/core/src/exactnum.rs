//! Exact rationals, error-tracked fixed-point reals, and reduction of the
//! quadratic phases `n²t/2 (+ n x)` modulo one.
//!
//! Rational times never leave exact arithmetic: their phases are reduced as
//! integers modulo `2q`. Irrational times are carried as [`FixedReal`] values
//! whose error is tracked in units of the last place, and every reduced phase
//! comes back with a bound on its error.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::contfrac::TimeSpec;
use crate::error::{Error, Result};

pub use num_rational::BigRational;

/// Default number of guard bits: phases are trusted to `2^-30`.
pub const DEFAULT_GUARD_BITS: u32 = 30;

/// Fractional part of an exact rational, in `[0, 1)`.
pub fn frac(r: &BigRational) -> BigRational {
    r - BigRational::from_integer(r.floor().to_integer())
}

/// `(n²p/(2q) + n·h/q_x) mod 1` in exact arithmetic.
pub fn rational_phase(
    n: impl Into<BigInt>,
    p: impl Into<BigInt>,
    q: impl Into<BigInt>,
    h: impl Into<BigInt>,
    q_x: impl Into<BigInt>,
) -> Result<BigRational> {
    let (n, p, q, h, q_x) = (n.into(), p.into(), q.into(), h.into(), q_x.into());
    if !q.is_positive() || !q_x.is_positive() {
        return Err(Error::Domain(format!(
            "denominators must be positive (q = {q}, q_x = {q_x})"
        )));
    }
    let two_q = &q * 2u32;
    let den = &two_q * &q_x;
    let num = &n * &n * &p * &q_x + &n * &h * &two_q;
    Ok(BigRational::new(num.mod_floor(&den), den))
}

/// Number of bits of fixed-point precision needed so that `n²·2^-bits`
/// stays below `2^-guard` for every `|n| ≤ n_max`.
pub fn precision_bits(n_max: u64, guard: u32) -> u32 {
    let log = if n_max <= 1 {
        0
    } else {
        64 - (n_max - 1).leading_zeros()
    };
    2 * log + guard + 2
}

/// A real number `x` known as `mantissa·2^-scale_bits` with
/// `|x − mantissa·2^-scale_bits| ≤ err_ulp·2^-scale_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedReal {
    mantissa: BigInt,
    scale_bits: u32,
    err_ulp: BigUint,
}

impl FixedReal {
    pub fn new(mantissa: BigInt, scale_bits: u32, err_ulp: BigUint) -> Result<Self> {
        if scale_bits == 0 {
            return Err(Error::Domain("scale_bits must be positive".into()));
        }
        Ok(Self {
            mantissa,
            scale_bits,
            err_ulp,
        })
    }

    /// Nearest fixed-point value to an exact rational; `err_ulp` is zero when
    /// the rational is representable and one otherwise.
    pub fn from_rational(r: &BigRational, scale_bits: u32) -> Self {
        let scaled = r * BigRational::from_integer(BigInt::one() << scale_bits);
        let rounded = scaled.round().to_integer();
        let exact = scaled.is_integer();
        Self {
            mantissa: rounded,
            scale_bits,
            err_ulp: if exact { BigUint::zero() } else { BigUint::one() },
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn scale_bits(&self) -> u32 {
        self.scale_bits
    }

    pub fn err_ulp(&self) -> &BigUint {
        &self.err_ulp
    }

    fn ulp(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << self.scale_bits)
    }

    /// The represented center value.
    pub fn center(&self) -> BigRational {
        BigRational::new(self.mantissa.clone(), BigInt::one() << self.scale_bits)
    }

    /// Absolute error bound as an exact rational.
    pub fn error_bound(&self) -> BigRational {
        self.ulp() * BigRational::from_integer(BigInt::from(self.err_ulp.clone()))
    }

    pub fn lower(&self) -> BigRational {
        self.center() - self.error_bound()
    }

    pub fn upper(&self) -> BigRational {
        self.center() + self.error_bound()
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lower() <= x && x <= &self.upper()
    }

    pub fn to_f64(&self) -> f64 {
        self.center().to_f64().unwrap_or(f64::NAN)
    }

    /// Exact re-expression at a finer scale, or a rounded one at a coarser scale.
    pub fn rescale(&self, bits: u32) -> Self {
        use std::cmp::Ordering;
        match bits.cmp(&self.scale_bits) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => {
                let shift = bits - self.scale_bits;
                Self {
                    mantissa: &self.mantissa << shift,
                    scale_bits: bits,
                    err_ulp: &self.err_ulp << shift,
                }
            }
            Ordering::Less => {
                let shift = self.scale_bits - bits;
                let unit = BigInt::one() << shift;
                let half = BigInt::one() << (shift - 1);
                let mantissa = (&self.mantissa + &half).div_floor(&unit);
                let err = (&self.err_ulp + ((BigUint::one() << shift) - 1u32)) >> shift;
                Self {
                    mantissa,
                    scale_bits: bits,
                    err_ulp: err + 1u32,
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let bits = self.scale_bits.max(other.scale_bits);
        let (a, b) = (self.rescale(bits), other.rescale(bits));
        Self {
            mantissa: a.mantissa + b.mantissa,
            scale_bits: bits,
            err_ulp: a.err_ulp + b.err_ulp,
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            mantissa: -&self.mantissa,
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul_int(&self, k: &BigInt) -> Self {
        Self {
            mantissa: &self.mantissa * k,
            scale_bits: self.scale_bits,
            err_ulp: &self.err_ulp * k.magnitude(),
        }
    }

    /// Product, rounded back to the larger of the two scales.
    pub fn mul(&self, other: &Self) -> Self {
        let bits = self.scale_bits.max(other.scale_bits);
        let (a, b) = (self.rescale(bits), other.rescale(bits));
        // |AB - ab| <= |A| eb + |B| ea + ea eb, all at scale 2·bits.
        let err = a.mantissa.magnitude() * &b.err_ulp
            + b.mantissa.magnitude() * &a.err_ulp
            + &a.err_ulp * &b.err_ulp;
        let wide = Self {
            mantissa: a.mantissa * b.mantissa,
            scale_bits: 2 * bits,
            err_ulp: err,
        };
        wide.rescale(bits)
    }

    /// Reduction modulo an integer period; the error bound is unchanged.
    pub fn reduce_mod(&self, period: &BigInt) -> Self {
        let unit = period << self.scale_bits;
        Self {
            mantissa: self.mantissa.mod_floor(&unit),
            ..self.clone()
        }
    }
}

/// Fixed-point approximation of a time, reduced modulo 2, with `err_ulp ≤ 1`.
///
/// Irrational times use the first convergent with `q_n·q_{n+1} ≥ 2^(bits+1)`:
/// the bracket `|t − p_n/q_n| < 1/(q_n q_{n+1})` then contributes at most half
/// an ulp and rounding the other half.
pub fn fixed_of_time(spec: &TimeSpec, bits: u32) -> Result<FixedReal> {
    if bits < 8 {
        return Err(Error::Domain(format!("need at least 8 bits, got {bits}")));
    }
    if let Some(r) = spec.exact_value() {
        return Ok(FixedReal::from_rational(&r, bits));
    }
    let target = BigInt::one() << (bits + 1);
    let mut depth = 16usize;
    loop {
        let exp = spec.expansion(depth)?;
        let conv = exp.convergents();
        for k in 0..conv.len().saturating_sub(1) {
            if &conv[k].1 * &conv[k + 1].1 >= target {
                let r = BigRational::new(conv[k].0.clone(), conv[k].1.clone());
                let mut fixed = FixedReal::from_rational(&r, bits);
                fixed.err_ulp = BigUint::one();
                return Ok(fixed);
            }
        }
        if exp.is_finite() || exp.is_truncated() || conv.len() < depth {
            return Err(Error::PrecisionExhausted(format!(
                "{spec} supplies {} convergents, not enough for {bits} bits",
                conv.len()
            )));
        }
        depth *= 2;
    }
}

/// A reduced phase together with a bound on its absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase {
    pub value: f64,
    pub error: f64,
}

/// Top 53 bits of `x / 2^bits` for `0 ≤ x < 2^bits`, as a float in `[0, 1)`.
fn ratio_to_unit(x: &BigUint, bits: u32) -> f64 {
    if bits <= 53 {
        return x.to_f64().unwrap_or(0.0) / 2f64.powi(bits as i32);
    }
    let top = (x >> (bits - 53)).to_u64().unwrap_or(0);
    top as f64 / 2f64.powi(53)
}

/// `(n²t/2) mod 1` for a fixed-point time, with a certified error bound.
///
/// Refused when `n²·2^-scale_bits > 2^-guard`; the caller then needs a
/// finer [`FixedReal`].
pub fn irrational_phase(n: i64, t: &FixedReal, guard: u32) -> Result<Phase> {
    let n2 = BigUint::from(n.unsigned_abs()).pow(2);
    let s = t.scale_bits();
    let allowed = if s >= guard {
        BigUint::one() << (s - guard)
    } else {
        BigUint::zero()
    };
    if n2 > allowed {
        return Err(Error::InsufficientPrecision(format!(
            "n = {n} needs more than {s} bits at guard {guard}"
        )));
    }
    if n2.is_zero() {
        return Ok(Phase {
            value: 0.0,
            error: 0.0,
        });
    }
    let modulus = BigInt::one() << (s + 1);
    let x = (BigInt::from(n2.clone()) * t.mantissa()).mod_floor(&modulus);
    let (_, mag) = x.into_parts();
    let value = ratio_to_unit(&mag, s + 1);
    let err_exact = BigRational::new(
        BigInt::from(&n2 * t.err_ulp()),
        BigInt::one() << (s + 1),
    );
    let rounding = if s + 1 > 53 { 2f64.powi(-53) } else { 0.0 };
    Ok(Phase {
        value,
        error: err_exact.to_f64().unwrap_or(f64::INFINITY) + rounding,
    })
}

#[derive(Clone, Debug)]
enum PhaseKind {
    /// `p mod 2q` and `2q`, both below `2^63`.
    SmallRational { p: u128, two_q: u128 },
    BigRational { p: BigInt, two_q: BigInt },
    /// Mantissa modulo `2^(bits+1)` with `bits + 1 ≤ 128`.
    SmallFixed { mantissa: u128, width: u32 },
    BigFixed { t: FixedReal },
}

/// Evaluator for `(n²t/2) mod 1` over a range `|n| ≤ n_max`, exact for
/// rational times and certified for the rest.
#[derive(Clone, Debug)]
pub struct QuadraticPhase {
    kind: PhaseKind,
    n_max: u64,
    max_error: f64,
}

impl QuadraticPhase {
    /// Exact evaluator for `t = p/q` (any representative; reduced internally).
    pub fn rational(p: &BigInt, q: &BigInt, n_max: u64) -> Result<Self> {
        if !q.is_positive() {
            return Err(Error::Domain(format!("q must be positive, got {q}")));
        }
        let two_q = q * 2u32;
        let p = p.mod_floor(&two_q);
        let kind = match (p.to_u128(), two_q.to_u128()) {
            (Some(p), Some(two_q)) if two_q < (1u128 << 63) => {
                PhaseKind::SmallRational { p, two_q }
            }
            _ => PhaseKind::BigRational { p, two_q },
        };
        Ok(Self {
            kind,
            n_max,
            max_error: 2f64.powi(-52),
        })
    }

    /// Certified evaluator from a fixed-point time.
    pub fn fixed(t: &FixedReal, n_max: u64, guard: u32) -> Result<Self> {
        let t = t.reduce_mod(&BigInt::from(2));
        // Checks the precondition at the largest index once.
        let worst = irrational_phase(n_max as i64, &t, guard)?;
        let width = t.scale_bits() + 1;
        let kind = if width <= 128 {
            let modulus = BigInt::one() << width;
            let m = t.mantissa().mod_floor(&modulus);
            PhaseKind::SmallFixed {
                mantissa: m.to_u128().expect("reduced below 2^128"),
                width,
            }
        } else {
            PhaseKind::BigFixed { t: t.clone() }
        };
        Ok(Self {
            kind,
            n_max,
            max_error: worst.error.max(2f64.powi(-52)),
        })
    }

    /// Picks the exact path for rational times and a policy-sized fixed-point
    /// time otherwise.
    pub fn for_time(spec: &TimeSpec, n_max: u64, guard: u32) -> Result<Self> {
        if let Some(r) = spec.as_rational() {
            return Self::rational(r.numer(), r.denom(), n_max);
        }
        let bits = precision_bits(n_max, guard);
        let t = fixed_of_time(spec, bits)?;
        Self::fixed(&t, n_max, guard)
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// Upper bound on the error of any phase returned for `|n| ≤ n_max`.
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    pub fn is_exact(&self) -> bool {
        matches!(
            self.kind,
            PhaseKind::SmallRational { .. } | PhaseKind::BigRational { .. }
        )
    }

    /// `(n²t/2) mod 1`.
    #[inline]
    pub fn phase(&self, n: i64) -> f64 {
        let m = n.unsigned_abs() as u128;
        match &self.kind {
            PhaseKind::SmallRational { p, two_q } => {
                let r = ((m * m) % two_q) * p % two_q;
                r as f64 / *two_q as f64
            }
            PhaseKind::BigRational { p, two_q } => {
                let r = (BigInt::from(m * m) * p).mod_floor(two_q);
                BigRational::new(r, two_q.clone()).to_f64().unwrap_or(0.0)
            }
            PhaseKind::SmallFixed { mantissa, width } => {
                let x = (m * m).wrapping_mul(*mantissa);
                let x = if *width == 128 {
                    x
                } else {
                    x & ((1u128 << width) - 1)
                };
                if *width <= 53 {
                    x as f64 / 2f64.powi(*width as i32)
                } else {
                    (x >> (width - 53)) as f64 / 2f64.powi(53)
                }
            }
            PhaseKind::BigFixed { t } => irrational_phase(n, t, 0)
                .map(|p| p.value)
                .unwrap_or(f64::NAN),
        }
    }
}
