//! Weighted theta sums `S(t,x) = Σ ω_n e(n²t/2 + nx)`: direct evaluation,
//! transform-based grids, sup-norm search, exhaustive rational probes, and the
//! monitored upper bound and stability ratios.

use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::compensated::ComplexSum;
use crate::contfrac::TimeSpec;
use crate::cutoff::{Sides, WeightVector};
use crate::error::{Error, Result};
use crate::exactnum::{fixed_of_time, BigRational, QuadraticPhase, DEFAULT_GUARD_BITS};

pub const DEFAULT_OVERSAMPLE: usize = 8;
pub const DEFAULT_REFINE_ITERS: usize = 40;
/// Largest `q` the exhaustive rational probe accepts.
pub const PROBE_BUDGET: u64 = 10_000;

const CHUNK: usize = 1 << 14;
const CERTIFY_MAX_BITS: u32 = 1 << 14;

/// `e(f) = exp(2πif)`.
#[inline]
pub fn e(f: f64) -> Complex64 {
    let f = f - f.round();
    let (s, c) = (TAU * f).sin_cos();
    Complex64::new(c, s)
}

/// `(n·x) mod 1` with the rounding of the product recovered.
#[inline]
fn turns(n: i64, x: f64) -> f64 {
    let nf = n as f64;
    let hi = nf * x;
    let lo = nf.mul_add(x, -hi);
    (hi - hi.floor()) + lo
}

/// A theta sum: a time and a weight vector.
#[derive(Clone, Debug)]
pub struct SumSpec {
    pub t: TimeSpec,
    pub weights: WeightVector,
    pub guard: u32,
}

impl SumSpec {
    pub fn new(t: TimeSpec, weights: WeightVector) -> Self {
        Self {
            t,
            weights,
            guard: DEFAULT_GUARD_BITS,
        }
    }

    pub fn with_guard(mut self, guard: u32) -> Self {
        self.guard = guard;
        self
    }

    fn phases(&self) -> Result<QuadraticPhase> {
        QuadraticPhase::for_time(&self.t, self.weights.degree().max(1), self.guard)
    }
}

/// The coefficients `ω_n e(n²t/2)` in ascending `n`, with a bound on the
/// error of each from phase rounding (per unit weight).
pub struct Coefficients {
    pub terms: Vec<(i64, Complex64)>,
    pub abs_weight: f64,
    pub coeff_error: f64,
}

pub fn coefficients(spec: &SumSpec) -> Result<Coefficients> {
    let phases = spec.phases()?;
    let raw: Vec<(i64, f64)> = spec.weights.terms().collect();
    let terms: Vec<(i64, Complex64)> = raw
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            chunk
                .iter()
                .map(|&(n, w)| (n, e(phases.phase(n)) * w))
                .collect::<Vec<_>>()
        })
        .collect();
    let abs_weight = crate::compensated::sum_f64(raw.iter().map(|(_, w)| w.abs()));
    Ok(Coefficients {
        terms,
        abs_weight,
        coeff_error: TAU * phases.max_error() + 4.0 * f64::EPSILON,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: Complex64,
    /// Bound on `|value − S(t,x)|`.
    pub error_bound: f64,
}

fn eval_terms(terms: &[(i64, Complex64)], x: f64) -> Complex64 {
    let x = x.rem_euclid(1.0);
    let r = e(x);
    let partial: Vec<Complex64> = terms
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = ComplexSum::new();
            let mut prev = i64::MIN;
            let mut z = Complex64::zero();
            for &(n, c) in chunk {
                z = if n == prev.wrapping_add(1) { z * r } else { e(turns(n, x)) };
                prev = n;
                acc.add(c * z);
            }
            acc.value()
        })
        .collect();
    partial.into_iter().collect::<ComplexSum>().value()
}

fn eval_error(c: &Coefficients) -> f64 {
    // Phase error of the coefficients plus the drift of the rotation
    // recurrence across one chunk.
    c.abs_weight * (c.coeff_error + (CHUNK as f64 + 2.0) * 4.0 * f64::EPSILON)
}

/// `S(t, x)` by compensated direct summation.
pub fn eval_sum(spec: &SumSpec, x: f64) -> Result<Evaluation> {
    let c = coefficients(spec)?;
    Ok(Evaluation {
        value: eval_terms(&c.terms, x),
        error_bound: eval_error(&c),
    })
}

/// `S(t, k/K)` for `k = 0..K`.
pub fn grid_values(spec: &SumSpec, k: usize) -> Result<Vec<Complex64>> {
    let c = coefficients(spec)?;
    grid_from_terms(&c.terms, spec.weights.degree(), k, 0.0)
}

/// Values at `x = (k + shift)/K`.
fn grid_from_terms(terms: &[(i64, Complex64)], degree: u64, k: usize, shift: f64) -> Result<Vec<Complex64>> {
    if (k as u64) < 2 * degree + 1 {
        return Err(Error::Aliasing { grid: k, degree });
    }
    let mut buf = vec![Complex64::zero(); k];
    for &(n, c) in terms {
        let idx = n.rem_euclid(k as i64) as usize;
        let tw = if shift == 0.0 {
            Complex64::one()
        } else {
            e(turns(n, shift / k as f64))
        };
        buf[idx] += c * tw;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(k).process(&mut buf);
    Ok(buf)
}

/// Smallest `2^a 3^b 5^c 7^d ≥ n`.
pub fn next_smooth(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p7 = 1usize;
    while p7 < best {
        let mut p5 = p7;
        while p5 < best {
            let mut p3 = p5;
            while p3 < best {
                let mut v = p3;
                while v < n {
                    v *= 2;
                }
                best = best.min(v);
                p3 *= 3;
            }
            p5 *= 5;
        }
        p7 *= 7;
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupNormResult {
    /// `|S(t, argmax_x)|` by direct evaluation.
    pub value: f64,
    pub argmax_x: f64,
    /// Effective number of sample points.
    pub grid_size: usize,
    pub grid_value: f64,
    /// `value / grid_value`.
    pub refinement_gain: f64,
    pub error_bound: f64,
}

/// Lower estimate of `sup_x |S(t,x)|`: `oversample` interleaved transforms of
/// a 7-smooth size `P ≥ 2N+1`, then golden-section refinement around the best
/// sample.
pub fn sup_norm(spec: &SumSpec, oversample: usize, refine_iters: usize) -> Result<SupNormResult> {
    if oversample < 4 {
        return Err(Error::Domain(format!("oversample must be >= 4, got {oversample}")));
    }
    let c = coefficients(spec)?;
    sup_from_terms(&c, spec.weights.degree(), oversample, refine_iters)
}

fn sup_from_terms(c: &Coefficients, degree: u64, oversample: usize, refine_iters: usize) -> Result<SupNormResult> {
    let p = next_smooth(2 * degree as usize + 1);
    let k = p * oversample;
    let mut best = (0.0f64, 0usize);
    for s in 0..oversample {
        let vals = grid_from_terms(&c.terms, degree, p, s as f64 / oversample as f64)?;
        for (i, v) in vals.iter().enumerate() {
            let a = v.norm();
            if a > best.0 {
                best = (a, i * oversample + s);
            }
        }
    }
    let grid_value = best.0;
    let x0 = best.1 as f64 / k as f64;
    let f = |x: f64| eval_terms(&c.terms, x).norm();
    let (mut bx, mut bv) = (x0, f(x0));
    let (mut lo, mut hi) = (x0 - 1.0 / k as f64, x0 + 1.0 / k as f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..refine_iters {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
        for (x, v) in [(a, fa), (b, fb)] {
            if v > bv {
                bx = x;
                bv = v;
            }
        }
    }
    Ok(SupNormResult {
        value: bv,
        argmax_x: bx.rem_euclid(1.0),
        grid_size: k,
        grid_value,
        refinement_gain: if grid_value > 0.0 { bv / grid_value } else { 1.0 },
        error_bound: eval_error(c),
    })
}

/// One lower bound from the orthogonality argument over `x = h/q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeFloor {
    /// `weighted` or `unit`, and `wide` (`q ≥ N−M+1`) or `narrow`.
    pub kind: String,
    pub floor: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub p: u64,
    pub q: u64,
    pub m: u64,
    pub n: u64,
    /// Maximizer `h/(2q)`.
    pub best_h: u64,
    pub best_x: f64,
    pub value: f64,
    /// Best value over the coarser points `x = h/q` alone.
    pub value_on_h_over_q: f64,
    pub floors: Vec<ProbeFloor>,
}

impl ProbeResult {
    pub fn all_hold(&self) -> bool {
        self.floors.iter().all(|f| f.holds)
    }
}

/// Exhaustive `max_h |S(p/q, h/(2q))|` over `h = 0..2q`, with the lower bounds
/// it must meet.
///
/// The coefficients are folded modulo `2q`, so the cost is `O(N + q log q)`.
pub fn rational_probe(p: u64, q: u64, weights: &WeightVector) -> Result<ProbeResult> {
    if q == 0 {
        return Err(Error::Domain("q must be positive".into()));
    }
    if p.gcd(&q) != 1 {
        return Err(Error::Domain(format!("{p}/{q} is not reduced")));
    }
    if q > PROBE_BUDGET {
        return Err(Error::Budget(format!(
            "probe denominator {q} exceeds the exhaustive budget {PROBE_BUDGET}"
        )));
    }
    let two_q = 2 * q;
    let mut bins = vec![ComplexSum::new(); two_q as usize];
    for (n, w) in weights.terms() {
        let r = n.rem_euclid(two_q as i64) as u64;
        let ph = ((r as u128 * r as u128 % two_q as u128) * p as u128 % two_q as u128) as f64 / two_q as f64;
        bins[r as usize].add(e(ph) * w);
    }
    let mut buf: Vec<Complex64> = bins.iter().map(ComplexSum::value).collect();
    FftPlanner::<f64>::new()
        .plan_fft_inverse(two_q as usize)
        .process(&mut buf);
    let (best_h, value) = buf
        .iter()
        .enumerate()
        .map(|(h, v)| (h as u64, v.norm()))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let value_on_h_over_q = buf.iter().step_by(2).map(|v| v.norm()).fold(0.0, f64::max);

    let (m, n) = (weights.m, weights.n);
    let mut floors = Vec::new();
    if m >= 1 && n > m {
        let span = (n - m) as f64;
        let wide = q > n - m;
        let sum_w = weights.sum();
        let weighted = if wide {
            sum_w / (2f64.sqrt() * span.sqrt())
        } else {
            sum_w / (2.0 * q as f64).sqrt()
        };
        let suffix = if wide { "wide" } else { "narrow" };
        floors.push(ProbeFloor {
            kind: format!("weighted_{suffix}"),
            floor: weighted,
            holds: value >= weighted * (1.0 - 1e-12),
        });
        let is_unit = weights.sides == Sides::Both && weights.values().iter().all(|&w| w == 1.0);
        if is_unit {
            let unit = if wide {
                2f64.sqrt() * span.sqrt()
            } else {
                2f64.sqrt() * span / (q as f64).sqrt()
            };
            floors.push(ProbeFloor {
                kind: format!("unit_{suffix}"),
                floor: unit,
                holds: value >= unit * (1.0 - 1e-12),
            });
        }
    }
    Ok(ProbeResult {
        p,
        q,
        m,
        n,
        best_h,
        best_x: best_h as f64 / two_q as f64,
        value,
        value_on_h_over_q,
        floors,
    })
}

fn interval(spec: &TimeSpec, bits: u32) -> Result<(BigRational, BigRational)> {
    if let Some(v) = spec.exact_value() {
        return Ok((v.clone(), v));
    }
    let f = fixed_of_time(spec, bits)?;
    Ok((f.lower(), f.upper()))
}

fn reduce_signed_mod2(x: BigRational) -> BigRational {
    let two = BigRational::from_integer(BigInt::from(2));
    let shifted = &x + BigRational::one();
    let k = (&shifted / &two).floor();
    x - two * k
}

/// Decides `|a − b| < bound` (distance taken modulo 2) with certified
/// arithmetic, refining irrational times until the answer is forced.
///
/// With `strict = false` the test is `≤`.
pub fn certify_gap_below(a: &TimeSpec, b: &TimeSpec, bound: &BigRational, strict: bool) -> Result<bool> {
    let mut bits = 64;
    loop {
        let (alo, ahi) = interval(a, bits)?;
        let (blo, bhi) = interval(b, bits)?;
        let mid = reduce_signed_mod2(&alo - &blo);
        let width = (&ahi - &alo) + (&bhi - &blo);
        let lo = mid.abs() - &width;
        let hi = mid.abs() + &width;
        let below = |v: &BigRational| if strict { v < bound } else { v <= bound };
        if below(&hi) {
            return Ok(true);
        }
        if !below(&lo) {
            return Ok(false);
        }
        if bits >= CERTIFY_MAX_BITS {
            return Err(Error::PrecisionExhausted(format!(
                "cannot decide |{a} - {b}| against {bound} at {bits} bits"
            )));
        }
        bits *= 2;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HlRatio {
    pub n: u64,
    pub sup: f64,
    /// `N/√q + √q`.
    pub scale: f64,
    pub ratio: f64,
}

/// `sup_x |Σ_{n=1}^N e(n²t/2 + nx)| / (N/√q + √q)` for each `N`, after
/// certifying `|t − p/q| ≤ 1/q²`.
pub fn hl_constant_monitor(t: &TimeSpec, p: &BigInt, q: &BigInt, n_list: &[u64], guard: u32) -> Result<Vec<HlRatio>> {
    if !q.is_positive() {
        return Err(Error::Domain("q must be positive".into()));
    }
    let approx = TimeSpec::rational(p.clone(), q.clone())?;
    let bound = BigRational::new(BigInt::one(), q * q);
    if !certify_gap_below(t, &approx, &bound, false)? {
        return Err(Error::Hypothesis(format!("|{t} - {p}/{q}| > 1/{q}^2")));
    }
    let qf = q.to_f64().unwrap_or(f64::INFINITY);
    n_list
        .iter()
        .map(|&n| {
            let w = WeightVector::unit(1, n, Sides::PositiveOnly)?;
            let spec = SumSpec::new(t.clone(), w).with_guard(guard);
            let sup = sup_norm(&spec, DEFAULT_OVERSAMPLE, DEFAULT_REFINE_ITERS)?.value;
            let scale = n as f64 / qf.sqrt() + qf.sqrt();
            Ok(HlRatio {
                n,
                sup,
                scale,
                ratio: sup / scale,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityResult {
    pub sup_t: f64,
    pub sup_t1: f64,
    pub ratio: f64,
}

/// `sup_x |S(t,·)| / sup_x |S(t1,·)|` after certifying `|t − t1| < K/N²`.
pub fn stability_ratio(t: &TimeSpec, t1: &TimeSpec, weights: &WeightVector, k_bound: f64, guard: u32) -> Result<StabilityResult> {
    let k = BigRational::from_f64(k_bound)
        .filter(|k| k.is_positive())
        .ok_or_else(|| Error::Domain(format!("K must be positive, got {k_bound}")))?;
    let n = BigInt::from(weights.degree());
    let bound = k / BigRational::from_integer(&n * &n);
    if !certify_gap_below(t, t1, &bound, true)? {
        return Err(Error::Hypothesis(format!(
            "|{t} - {t1}| >= {k_bound}/N^2 with N = {n}"
        )));
    }
    let sup = |time: &TimeSpec| -> Result<f64> {
        let spec = SumSpec::new(time.clone(), weights.clone()).with_guard(guard);
        Ok(sup_norm(&spec, DEFAULT_OVERSAMPLE, DEFAULT_REFINE_ITERS)?.value)
    };
    let sup_t = sup(t)?;
    let sup_t1 = if t == t1 { sup_t } else { sup(t1)? };
    Ok(StabilityResult {
        sup_t,
        sup_t1,
        ratio: sup_t / sup_t1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::{make_smooth_cutoff, rough_weights, smooth_in_range, smooth_weights};
    use proptest::prelude::*;

    fn rat(p: i64, q: i64) -> TimeSpec {
        TimeSpec::rational(p, q).unwrap()
    }

    fn golden() -> TimeSpec {
        TimeSpec::parse("quad:(-1+1*sqrt(5))/2").unwrap()
    }

    /// Term-by-term oracle with independent `f64` phases.
    fn naive(t: f64, w: &WeightVector, x: f64) -> Complex64 {
        w.terms()
            .map(|(n, wn)| {
                let nf = n as f64;
                let ph = nf * nf * t / 2.0 + nf * x;
                Complex64::from_polar(wn, TAU * ph)
            })
            .sum()
    }

    #[test]
    fn eval_examples() {
        let zero = WeightVector::new(None, 1, 3, Sides::Both, vec![0.0; 3]).unwrap();
        let v = eval_sum(&SumSpec::new(rat(1, 3), zero), 0.3).unwrap();
        assert_eq!(v.value, Complex64::zero());

        let single = WeightVector::unit(1, 1, Sides::PositiveOnly).unwrap();
        let v = eval_sum(&SumSpec::new(rat(0, 1), single), 0.0).unwrap();
        assert!((v.value - Complex64::one()).norm() < 1e-15);

        let rough = WeightVector::unit(1, 4, Sides::Both).unwrap();
        let v = eval_sum(&SumSpec::new(rat(1, 1), rough), 0.0).unwrap();
        assert!(v.value.norm() < 1e-14, "{}", v.value);
    }

    #[test]
    fn eval_matches_naive_oracle() {
        let chi = make_smooth_cutoff();
        let w = smooth_weights(7, &chi).unwrap();
        for (p, q) in [(1i64, 3i64), (3, 5), (7, 13)] {
            let spec = SumSpec::new(rat(p, q), w.clone());
            for x in [0.0, 0.123, 0.5, 0.987] {
                let got = eval_sum(&spec, x).unwrap();
                let want = naive(p as f64 / q as f64, &w, x);
                assert!((got.value - want).norm() < 1e-9, "{p}/{q} x={x}");
            }
        }
    }

    #[test]
    fn eval_error_bound_covers_irrational_phase_rounding() {
        let w = rough_weights(8).unwrap();
        let spec = SumSpec::new(golden(), w.clone());
        let got = eval_sum(&spec, 0.25).unwrap();
        let want = naive((5f64.sqrt() - 1.0) / 2.0, &w, 0.25);
        // The naive oracle itself carries about n²·ε of phase error.
        assert!((got.value - want).norm() < 1e-7);
        assert!(got.error_bound < 1e-5);
    }

    #[test]
    fn periodicity_in_x() {
        let spec = SumSpec::new(rat(3, 5), rough_weights(6).unwrap());
        for x in [0.1, 0.37, 0.8] {
            let a = eval_sum(&spec, x).unwrap();
            let b = eval_sum(&spec, x + 1.0).unwrap();
            assert!((a.value - b.value).norm() < 1e-12);
        }
    }

    #[test]
    fn grid_examples() {
        let zero = WeightVector::new(None, 1, 3, Sides::Both, vec![0.0; 3]).unwrap();
        let g = grid_values(&SumSpec::new(rat(1, 3), zero), 16).unwrap();
        assert!(g.iter().all(|v| v.norm() == 0.0));

        let single = WeightVector::new(None, 5, 5, Sides::PositiveOnly, vec![0.75]).unwrap();
        let g = grid_values(&SumSpec::new(golden(), single), 16).unwrap();
        assert!(g.iter().all(|v| (v.norm() - 0.75).abs() < 1e-14));

        let w = WeightVector::unit(1, 8, Sides::Both).unwrap();
        assert!(matches!(
            grid_values(&SumSpec::new(rat(1, 3), w), 16),
            Err(Error::Aliasing { grid: 16, degree: 8 })
        ));
    }

    proptest! {
        #[test]
        fn grid_agrees_with_direct(ws in proptest::collection::vec(-1.0f64..1.0, 8), p in 0i64..40, q in 1i64..20) {
            prop_assume!(num_integer::gcd(p, q) == 1 && p < 2 * q);
            let w = WeightVector::new(None, 1, 8, Sides::Both, ws).unwrap();
            let spec = SumSpec::new(rat(p, q), w);
            let g = grid_values(&spec, 32).unwrap();
            for (k, v) in g.iter().enumerate() {
                let d = eval_sum(&spec, k as f64 / 32.0).unwrap().value;
                prop_assert!((v - d).norm() < 1e-12);
            }
        }

        #[test]
        fn parseval_on_grids(ws in proptest::collection::vec(0.0f64..1.0, 20), extra in 0usize..30) {
            let w = WeightVector::new(None, 3, 22, Sides::Both, ws).unwrap();
            let spec = SumSpec::new(golden(), w.clone());
            let k = 45 + extra;
            let g = grid_values(&spec, k).unwrap();
            let mean: f64 = g.iter().map(|v| v.norm_sqr()).sum::<f64>() / k as f64;
            prop_assert!((mean - w.l2_squared()).abs() < 1e-10);
        }
    }

    #[test]
    fn next_smooth_examples() {
        assert_eq!(next_smooth(1), 1);
        assert_eq!(next_smooth(11), 12);
        assert_eq!(next_smooth(257), 270);
        assert_eq!(next_smooth(4_194_305), 4_199_040);
        for n in 1..2000 {
            let s = next_smooth(n);
            assert!(s >= n);
            let mut r = s;
            for f in [2, 3, 5, 7] {
                while r.is_multiple_of(f) {
                    r /= f;
                }
            }
            assert_eq!(r, 1);
            assert!((n..s).all(|m| {
                let mut r = m;
                for f in [2, 3, 5, 7] {
                    while r % f == 0 {
                        r /= f;
                    }
                }
                r != 1
            }));
        }
    }

    #[test]
    fn sup_of_single_character_is_its_weight() {
        let w = WeightVector::unit(37, 37, Sides::PositiveOnly).unwrap();
        let r = sup_norm(&SumSpec::new(golden(), w), 8, 40).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_matches_dense_oracle() {
        for (t, j) in [(rat(1, 3), 5), (golden(), 6), (rat(7, 13), 6)] {
            let spec = SumSpec::new(t.clone(), rough_weights(j).unwrap());
            let r = sup_norm(&spec, 8, 40).unwrap();
            let n = spec.weights.degree() as usize;
            let dense = grid_values(&spec, 64 * (2 * n + 1)).unwrap();
            let oracle = dense.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(r.value >= oracle * (1.0 - 1e-3), "{t} j={j}: {} vs {oracle}", r.value);
            assert!(r.value <= oracle * (1.0 + 1e-3));
            let at = eval_sum(&spec, r.argmax_x).unwrap().value.norm();
            assert!((at - r.value).abs() < 1e-12);
            assert!(r.refinement_gain >= 1.0);
        }
    }

    #[test]
    fn sup_is_symmetric_for_unit_weights() {
        let spec = SumSpec::new(golden(), rough_weights(7).unwrap());
        let r = sup_norm(&spec, 8, 40).unwrap();
        let mirrored = eval_sum(&spec, -r.argmax_x).unwrap().value.norm();
        assert!((mirrored - r.value).abs() < 1e-10);
    }

    #[test]
    fn sup_within_theorem_bounds_at_one_third() {
        let spec = SumSpec::new(rat(1, 3), rough_weights(6).unwrap());
        let r = sup_norm(&spec, 8, 40).unwrap();
        let s3 = 3f64.sqrt();
        assert!(r.value >= 64.0 / s3 / 2f64.sqrt());
        let c = r.value / (64.0 / s3 + s3);
        assert!(c <= 10.0, "measured C = {c}");
    }

    #[test]
    fn sup_norm_rejects_low_oversampling() {
        let spec = SumSpec::new(rat(1, 3), rough_weights(3).unwrap());
        assert!(sup_norm(&spec, 3, 10).is_err());
    }

    #[test]
    fn probe_examples() {
        let unit = WeightVector::unit(1, 16, Sides::Both).unwrap();
        let r = rational_probe(1, 17, &unit).unwrap();
        assert!(r.value >= 2f64.sqrt() * 15f64.sqrt());
        assert!(r.all_hold());
        assert_eq!(r.floors.len(), 2);

        let unit = WeightVector::unit(4, 64, Sides::Both).unwrap();
        let r = rational_probe(1, 3, &unit).unwrap();
        assert!(r.value >= 2f64.sqrt() * 60.0 / 3f64.sqrt());
        assert!(r.all_hold());

        let chi = make_smooth_cutoff();
        let w = smooth_weights(6, &chi).unwrap();
        let r = rational_probe(1, 5, &w).unwrap();
        let exact_sum: f64 = w.terms().map(|(_, v)| v).sum();
        assert!(r.value >= exact_sum / 10f64.sqrt());
        assert!(r.all_hold());
    }

    #[test]
    fn probe_matches_direct_evaluation() {
        let chi = make_smooth_cutoff();
        let w = smooth_in_range(4, 64, &chi).unwrap();
        let r = rational_probe(2, 5, &w).unwrap();
        let spec = SumSpec::new(rat(2, 5), w);
        let direct = (0..10)
            .map(|h| eval_sum(&spec, h as f64 / 10.0).unwrap().value.norm())
            .fold(0.0, f64::max);
        assert!((direct - r.value).abs() < 1e-10);
        assert!(r.value >= r.value_on_h_over_q);
    }

    #[test]
    fn probe_refuses() {
        let unit = WeightVector::unit(1, 16, Sides::Both).unwrap();
        assert!(matches!(rational_probe(1, 20_000, &unit), Err(Error::Budget(_))));
        assert!(matches!(rational_probe(2, 4, &unit), Err(Error::Domain(_))));
    }

    #[test]
    fn hl_monitor_examples() {
        let third = rat(1, 3);
        let r = hl_constant_monitor(&third, &1.into(), &3.into(), &[16, 64], DEFAULT_GUARD_BITS).unwrap();
        assert_eq!(r.len(), 2);

        let half = rat(1, 2);
        let r = hl_constant_monitor(&half, &1.into(), &2.into(), &[16], DEFAULT_GUARD_BITS).unwrap();
        assert!(r[0].ratio.is_finite() && r[0].ratio > 0.0);

        // F_n/F_{n+1} convergents of the golden conjugate.
        let g = golden();
        let r = hl_constant_monitor(&g, &34.into(), &55.into(), &[256], DEFAULT_GUARD_BITS).unwrap();
        assert!(r[0].ratio < 10.0);

        assert!(matches!(
            hl_constant_monitor(&g, &1.into(), &3.into(), &[16], DEFAULT_GUARD_BITS),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn certified_gaps() {
        let g = golden();
        let c = rat(89, 144);
        let b = BigRational::new(1.into(), (144 * 233).into());
        assert!(certify_gap_below(&g, &c, &b, true).unwrap());
        let b = BigRational::new(1.into(), (144 * 377).into());
        assert!(!certify_gap_below(&g, &c, &b, true).unwrap());
        // Distance is taken modulo 2.
        assert!(certify_gap_below(&rat(1999, 1000), &rat(0, 1), &BigRational::new(1.into(), 999.into()), true).unwrap());
    }

    #[test]
    fn stability_examples() {
        let w = rough_weights(6).unwrap();
        let g = golden();
        let r = stability_ratio(&g, &g, &w, 1.0, DEFAULT_GUARD_BITS).unwrap();
        assert_eq!(r.ratio, 1.0);

        let conv = rat(89, 144);
        let r = stability_ratio(&g, &conv, &w, 1.0, DEFAULT_GUARD_BITS).unwrap();
        assert!(r.ratio > 0.5 && r.ratio < 2.0, "{}", r.ratio);

        assert!(matches!(
            stability_ratio(&g, &rat(1, 2), &w, 1.0, DEFAULT_GUARD_BITS),
            Err(Error::Hypothesis(_))
        ));
    }
}
