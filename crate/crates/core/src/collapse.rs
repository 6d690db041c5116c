//! At a rational time `p/q` the fundamental solution is a finite delta comb:
//! `E(p/q, x) = κ/√q · Σ_k e(−½q q' x² + ½q η x − ξη/8) δ(x − x_k)` with
//! `x_k = (k + ξ/2)/q`. Both sides are paired against smooth periodic test
//! functions and the unimodular factor `κ` is extracted numerically.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::compensated::ComplexSum;
use crate::contfrac::{expand_rational, Parity};
use crate::error::{Error, Result};
use crate::thetasum::e;

/// Truncation target for the pairing series.
pub const TAIL_TOLERANCE: f64 = 1e-14;
/// `|κ|` and `κ⁸` must be within this of 1.
pub const KAPPA_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CombFormula {
    pub p: u64,
    pub q: u64,
    pub p_prev: i64,
    pub q_prev: u64,
    pub xi: u8,
    pub eta: u8,
    pub kappa: Option<Complex64>,
}

/// Comb data for `p/q` from the expansion whose last index is odd, so that
/// `p q_{n−1} − q p_{n−1} = 1`.
pub fn comb_of(p: u64, q: u64) -> Result<CombFormula> {
    let exp = expand_rational(p, q, Parity::Odd)?;
    let k = exp.len() - 1;
    let (pp, qp) = exp.previous(k);
    let det = BigInt::from(p) * &qp - BigInt::from(q) * &pp;
    if det != BigInt::from(1) {
        return Err(Error::Postcondition(format!(
            "determinant {det} for {p}/{q}, expected 1"
        )));
    }
    let p_prev = pp
        .to_i64()
        .ok_or_else(|| Error::Domain("p_(n-1) out of range".into()))?;
    let q_prev = qp
        .to_u64()
        .ok_or_else(|| Error::Domain("q_(n-1) out of range".into()))?;
    Ok(CombFormula {
        p,
        q,
        p_prev,
        q_prev,
        xi: ((p % 2) * (q % 2)) as u8,
        eta: (p_prev.rem_euclid(2) as u64 * (q_prev % 2)) as u8,
        kappa: None,
    })
}

impl CombFormula {
    /// `x_k = (k + ξ/2)/q`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.q)
            .map(|k| (2 * k + self.xi as u64) as f64 / (2 * self.q) as f64)
            .collect()
    }

    /// `e(−½ q q' x² + ½ q η x − ξη/8)` at `x_k`, from the exact residue of
    /// `−q'(2k+ξ)² + 2qη(2k+ξ) − qξη` modulo `8q`.
    pub fn weight_at(&self, k: u64) -> Complex64 {
        let q = self.q as i128;
        let m = (2 * k + self.xi as u64) as i128;
        let (xi, eta) = (self.xi as i128, self.eta as i128);
        let qp = self.q_prev as i128;
        let num = -qp * m * m + 2 * q * eta * m - q * xi * eta;
        let den = 8 * q;
        e(num.rem_euclid(den) as f64 / den as f64)
    }

    /// The same phase at an arbitrary `x`, in floating point.
    pub fn weight_phase(&self, x: f64) -> Complex64 {
        let q = self.q as f64;
        let f = -0.5 * q * self.q_prev as f64 * x * x + 0.5 * q * self.eta as f64 * x
            - (self.xi * self.eta) as f64 / 8.0;
        e(f)
    }
}

/// A smooth 1-periodic test function with known Fourier coefficients
/// `φ̂(m) = ∫₀¹ φ(x) e(−mx) dx`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TestFunction {
    /// `Σ_m exp(−(x − c − m)²/w²)`.
    Gaussian { width: f64, center: f64 },
    /// `Σ c_m e(mx)`.
    TrigPolynomial { coeffs: Vec<(i64, Complex64)> },
}

impl TestFunction {
    pub fn gaussian(width: f64, center: f64) -> Result<Self> {
        if !(width > 0.0 && width <= 1.0) || !center.is_finite() {
            return Err(Error::Domain(format!("bad Gaussian width {width} / center {center}")));
        }
        Ok(TestFunction::Gaussian { width, center })
    }

    pub fn value(&self, x: f64) -> Complex64 {
        match self {
            TestFunction::Gaussian { width, center } => {
                let d = x - center;
                let reach = (8.0 * width).ceil() as i64 + 1;
                let base = d.round() as i64;
                let mut acc = 0.0;
                for m in (base - reach)..=(base + reach) {
                    let u = (d - m as f64) / width;
                    acc += (-u * u).exp();
                }
                Complex64::new(acc, 0.0)
            }
            TestFunction::TrigPolynomial { coeffs } => coeffs
                .iter()
                .map(|&(m, c)| c * e(m as f64 * x))
                .sum(),
        }
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        match self {
            TestFunction::Gaussian { width, center } => {
                let mf = m as f64;
                let amp = width * PI.sqrt() * (-(PI * width * mf).powi(2)).exp();
                e(-(mf * center).rem_euclid(1.0)) * amp
            }
            TestFunction::TrigPolynomial { coeffs } => coeffs
                .iter()
                .filter(|(k, _)| *k == m)
                .map(|(_, c)| *c)
                .sum(),
        }
    }

    /// Bound on `Σ_{|m|>n} |φ̂(m)|`.
    pub fn tail_bound(&self, n: u64) -> f64 {
        match self {
            TestFunction::Gaussian { width, .. } => {
                let a = (PI * width).powi(2);
                let n1 = (n + 1) as f64;
                let first = width * PI.sqrt() * (-a * n1 * n1).exp();
                let ratio = (-a * (2.0 * n1 + 1.0)).exp();
                2.0 * first / (1.0 - ratio)
            }
            TestFunction::TrigPolynomial { coeffs } => coeffs
                .iter()
                .filter(|(k, _)| k.unsigned_abs() > n)
                .map(|(_, c)| c.norm())
                .sum(),
        }
    }

    /// Smallest power of two whose tail bound is below [`TAIL_TOLERANCE`].
    pub fn default_cutoff(&self) -> u64 {
        let mut n = 1u64;
        while self.tail_bound(n) >= TAIL_TOLERANCE && n < 1 << 30 {
            n *= 2;
        }
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pairing {
    pub value: Complex64,
    pub truncation_bound: f64,
}

/// `⟨E(p/q,·), φ⟩ = Σ_{|n|≤N} e(n²p/(2q)) φ̂(−n)`.
pub fn lhs_pairing(p: u64, q: u64, phi: &TestFunction, n: u64) -> Result<Pairing> {
    if q == 0 {
        return Err(Error::Domain("q must be positive".into()));
    }
    let truncation_bound = phi.tail_bound(n);
    if truncation_bound > 1e-12 {
        return Err(Error::InsufficientPrecision(format!(
            "tail bound {truncation_bound:e} at N = {n} is above 1e-12"
        )));
    }
    let two_q = 2 * q as u128;
    let mut acc = ComplexSum::new();
    for k in -(n as i64)..=(n as i64) {
        let m = k.unsigned_abs() as u128 % two_q;
        let r = (m * m % two_q) * (p as u128 % two_q) % two_q;
        acc.add(e(r as f64 / two_q as f64) * phi.coeff(-k));
    }
    Ok(Pairing {
        value: acc.value(),
        truncation_bound,
    })
}

/// `κ/√q · Σ_k weight(x_k) φ(x_k)`.
pub fn rhs_pairing(comb: &CombFormula, phi: &TestFunction, kappa_trial: Complex64) -> Complex64 {
    let pts = comb.points();
    let s: ComplexSum = (0..comb.q)
        .map(|k| comb.weight_at(k) * phi.value(pts[k as usize]))
        .collect();
    s.value() * kappa_trial / (comb.q as f64).sqrt()
}

/// Test functions tried in order when extracting `κ`: narrow then wider
/// Gaussians on the first comb point, then off the comb.
pub fn fallback_functions(comb: &CombFormula) -> Vec<TestFunction> {
    let x0 = comb.points()[0];
    let half = 0.5 / comb.q as f64;
    [(0.05, x0), (0.1, x0), (0.05, x0 + 0.3 * half), (0.1, 0.37)]
        .into_iter()
        .map(|(w, c)| TestFunction::Gaussian { width: w, center: c })
        .collect()
}

/// `κ = lhs/rhs(κ = 1)` from the first usable function in `phis`, checked
/// for `|κ| = 1` and `κ⁸ = 1`.
pub fn extract_kappa(comb: &CombFormula, phis: &[TestFunction]) -> Result<Complex64> {
    for phi in phis {
        let denom = rhs_pairing(comb, phi, Complex64::new(1.0, 0.0));
        if denom.norm() < 1e-6 {
            continue;
        }
        let lhs = lhs_pairing(comb.p, comb.q, phi, phi.default_cutoff())?;
        let kappa = lhs.value / denom;
        let modulus_gap = (kappa.norm() - 1.0).abs();
        let eighth_gap = (kappa.powi(8) - 1.0).norm();
        if modulus_gap >= KAPPA_TOLERANCE || eighth_gap >= KAPPA_TOLERANCE {
            return Err(Error::Postcondition(format!(
                "kappa = {kappa} for {}/{}: ||kappa| - 1| = {modulus_gap:e}, |kappa^8 - 1| = {eighth_gap:e}",
                comb.p, comb.q
            )));
        }
        return Ok(kappa);
    }
    Err(Error::Degenerate(format!(
        "every test function vanishes on the comb of {}/{}",
        comb.p, comb.q
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollapseReport {
    pub p: u64,
    pub q: u64,
    pub xi: u8,
    pub eta: u8,
    pub q_prev: u64,
    pub p_prev: i64,
    pub kappa_re: f64,
    pub kappa_im: f64,
    pub max_residual: f64,
    pub points: Vec<f64>,
    pub test_functions: usize,
}

/// Extracts `κ` from `phis[0]` (falling back along `phis` if it vanishes on
/// the comb) and reports `max |lhs − rhs(κ)|` over all of `phis`.
pub fn verify_collapse(p: u64, q: u64, phis: &[TestFunction], n: Option<u64>) -> Result<CollapseReport> {
    if phis.is_empty() {
        return Err(Error::Domain("no test functions".into()));
    }
    let mut comb = comb_of(p, q)?;
    let kappa = extract_kappa(&comb, phis)?;
    comb.kappa = Some(kappa);
    let mut max_residual: f64 = 0.0;
    for phi in phis {
        let cutoff = n.unwrap_or_else(|| phi.default_cutoff());
        let lhs = lhs_pairing(p, q, phi, cutoff)?;
        let rhs = rhs_pairing(&comb, phi, kappa);
        max_residual = max_residual.max((lhs.value - rhs).norm());
    }
    Ok(CollapseReport {
        p,
        q,
        xi: comb.xi,
        eta: comb.eta,
        q_prev: comb.q_prev,
        p_prev: comb.p_prev,
        kappa_re: kappa.re,
        kappa_im: kappa.im,
        max_residual,
        points: comb.points(),
        test_functions: phis.len(),
    })
}

/// `count` Gaussians with widths alternating 0.05 and 0.1 at spread centers.
pub fn gaussian_family(count: usize) -> Vec<TestFunction> {
    (0..count)
        .map(|i| TestFunction::Gaussian {
            width: if i % 2 == 0 { 0.05 } else { 0.1 },
            center: (0.137 + 0.618_033_988_749_895 * i as f64).rem_euclid(1.0),
        })
        .collect()
}

/// `|Σ_{n=0}^{2q−1} e(n²p/(2q) + nh/q)|` for `h = 0..q`, with exact phases.
pub fn full_period_gauss_sums(p: u64, q: u64) -> Result<Vec<f64>> {
    if q == 0 || p.gcd(&q) != 1 {
        return Err(Error::Domain(format!("{p}/{q} is not a reduced fraction")));
    }
    let two_q = 2 * q as u128;
    Ok((0..q as u128)
        .map(|h| {
            let s: ComplexSum = (0..two_q)
                .map(|n| {
                    let r = (n * n * p as u128 + 2 * n * h) % two_q;
                    e(r as f64 / two_q as f64)
                })
                .collect();
            s.value().norm()
        })
        .collect())
}
