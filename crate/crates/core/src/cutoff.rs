//! The smooth dyadic cutoff `χ` and the rough and smooth block weights.

use serde::Serialize;

use crate::error::{Error, Result};

fn g(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// `χ(ξ) = φ(ξ) − φ(2ξ)` where `φ` is the `exp(−1/u)` smooth step from 1 on
/// `(0, 1]` to 0 on `[2, ∞)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffFunction;

pub fn make_smooth_cutoff() -> CutoffFunction {
    CutoffFunction
}

impl CutoffFunction {
    /// The smooth step.
    pub fn phi(&self, xi: f64) -> f64 {
        if xi <= 1.0 {
            return 1.0;
        }
        if xi >= 2.0 {
            return 0.0;
        }
        let a = g(2.0 - xi);
        let b = g(xi - 1.0);
        a / (a + b)
    }

    /// `χ(ξ)`, exactly zero outside `(1/2, 2)`.
    pub fn chi(&self, xi: f64) -> f64 {
        if xi <= 0.5 || xi >= 2.0 {
            return 0.0;
        }
        self.phi(xi) - self.phi(2.0 * xi)
    }

    /// The low-frequency piece `1 − Σ_{j≥1} χ(2^{-j}ξ) = φ(ξ)`.
    pub fn chi0(&self, xi: f64) -> f64 {
        self.phi(xi.abs())
    }

    /// Bound on `∫|χ'|`, which bounds the variation of `n ↦ χ(2^{-j}n)` on
    /// each side independently of `j`.
    pub fn kappa(&self) -> f64 {
        2.0
    }

    /// `∫_0^∞ χ = ½ ∫_0^∞ φ = 3/4`.
    pub fn integral(&self) -> f64 {
        0.75
    }
}

/// Whether negative frequencies carry the mirrored weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sides {
    Both,
    PositiveOnly,
}

/// Weights `ω_n` for `m ≤ |n| ≤ n_max`, zero elsewhere.
///
/// `values[k]` is `ω_{m+k}`; with [`Sides::Both`], `ω_{−n} = ω_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightVector {
    pub j: Option<u32>,
    pub m: u64,
    pub n: u64,
    pub sides: Sides,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(j: Option<u32>, m: u64, n: u64, sides: Sides, values: Vec<f64>) -> Result<Self> {
        if n < m {
            return Err(Error::Domain(format!("empty range [{m}, {n}]")));
        }
        if values.len() as u64 != n - m + 1 {
            return Err(Error::Domain(format!(
                "{} weights for range [{m}, {n}]",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite weight".into()));
        }
        Ok(Self {
            j,
            m,
            n,
            sides,
            values,
        })
    }

    /// Unit weights on `m ≤ |n| ≤ n` (or `m ≤ n' ≤ n`).
    pub fn unit(m: u64, n: u64, sides: Sides) -> Result<Self> {
        if n < m {
            return Err(Error::Domain(format!("empty range [{m}, {n}]")));
        }
        Self::new(None, m, n, sides, vec![1.0; (n - m + 1) as usize])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ω_k` for any integer `k`.
    pub fn weight(&self, k: i64) -> f64 {
        if k < 0 && self.sides == Sides::PositiveOnly {
            return 0.0;
        }
        let a = k.unsigned_abs();
        if a < self.m || a > self.n {
            0.0
        } else {
            self.values[(a - self.m) as usize]
        }
    }

    /// `(k, ω_k)` over every integer with a nonzero weight, ascending.
    pub fn terms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let neg = (self.sides == Sides::Both)
            .then(|| {
                self.values
                    .iter()
                    .enumerate()
                    .rev()
                    .map(move |(i, &w)| (-((self.m + i as u64) as i64), w))
                    .filter(|&(k, _)| k != 0)
            })
            .into_iter()
            .flatten();
        let pos = self
            .values
            .iter()
            .enumerate()
            .map(move |(i, &w)| ((self.m + i as u64) as i64, w));
        neg.chain(pos).filter(|&(_, w)| w != 0.0)
    }

    /// Number of nonzero weights over all integers.
    pub fn nonzero_count(&self) -> u64 {
        self.terms().count() as u64
    }

    /// `Σ_k |ω_k|²`.
    pub fn l2_squared(&self) -> f64 {
        self.terms().map(|(_, w)| w * w).sum()
    }

    /// `Σ_k ω_k`.
    pub fn sum(&self) -> f64 {
        self.terms().map(|(_, w)| w).sum()
    }

    /// Total variation `Σ_k |ω_{k+1} − ω_k|` over all integers.
    pub fn tv(&self) -> f64 {
        let lo = match self.sides {
            Sides::Both => -(self.n as i64) - 1,
            Sides::PositiveOnly => self.m as i64 - 1,
        };
        let hi = self.n as i64;
        (lo..=hi)
            .map(|k| (self.weight(k + 1) - self.weight(k)).abs())
            .sum()
    }

    /// Largest frequency magnitude carrying weight.
    pub fn degree(&self) -> u64 {
        self.n
    }
}

/// Rough block `j`: `ω_n = 1` for `2^{j−1} < |n| ≤ 2^{j+1}`, and `|n| ≤ 2` at `j = 0`.
pub fn rough_weights(j: u32) -> Result<WeightVector> {
    check_scale(j)?;
    let (m, n) = if j == 0 {
        (0, 2)
    } else {
        ((1u64 << (j - 1)) + 1, 1u64 << (j + 1))
    };
    let mut w = WeightVector::unit(m, n, Sides::Both)?;
    w.j = Some(j);
    Ok(w)
}

/// Smooth block `j`: `ω_n = χ(2^{-j}|n|)`, and `χ_0(|n|)` at `j = 0`.
pub fn smooth_weights(j: u32, chi: &CutoffFunction) -> Result<WeightVector> {
    check_scale(j)?;
    if j == 0 {
        let values = (0..=2).map(|k| chi.chi0(k as f64)).collect();
        return WeightVector::new(Some(0), 0, 2, Sides::Both, values);
    }
    let (m, n) = (1u64 << (j - 1), 1u64 << (j + 1));
    let scale = (-(j as i32) as f64).exp2();
    let values = (m..=n).map(|k| chi.chi(k as f64 * scale)).collect();
    WeightVector::new(Some(j), m, n, Sides::Both, values)
}

/// Smooth weights on an arbitrary `[m, n]`: `χ(2^{-j}|k|)` for the largest
/// `j ≥ 1` whose block `[2^{j−1}, 2^{j+1}]` fits in `[m, n]`.
pub fn smooth_in_range(m: u64, n: u64, chi: &CutoffFunction) -> Result<WeightVector> {
    let j = (1..62u32)
        .rev()
        .find(|&j| (1u64 << (j - 1)) >= m && (1u64 << (j + 1)) <= n)
        .ok_or_else(|| Error::Domain(format!("no dyadic block fits in [{m}, {n}]")))?;
    let scale = (-(j as i32) as f64).exp2();
    let values = (m..=n).map(|k| chi.chi(k as f64 * scale)).collect();
    WeightVector::new(Some(j), m, n, Sides::Both, values)
}

fn check_scale(j: u32) -> Result<()> {
    if j > 40 {
        return Err(Error::Budget(format!("scale j = {j} is beyond 40")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chi_examples() {
        let chi = make_smooth_cutoff();
        assert_eq!(chi.chi(1.0), 1.0);
        assert_eq!(chi.chi(0.5), 0.0);
        assert_eq!(chi.chi(2.0), 0.0);
        assert_eq!(chi.chi(0.25), 0.0);
        assert_eq!(chi.chi(7.0), 0.0);
        let s: f64 = (-10..=10).map(|j| chi.chi(3.7 * 2f64.powi(-j))).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_of_unity_on_dyadic_range() {
        let chi = make_smooth_cutoff();
        let big_j = 12;
        let lo = 2f64.powi(-big_j + 1);
        let hi = 2f64.powi(big_j - 1);
        for i in 0..=20_000 {
            let xi = lo * (hi / lo).powf(i as f64 / 20_000.0);
            let s: f64 = (-big_j..=big_j).map(|j| chi.chi(xi * 2f64.powi(-j))).sum();
            assert!((s - 1.0).abs() < 1e-12, "xi = {xi}: {s}");
        }
    }

    proptest! {
        #[test]
        fn chi_is_a_bump(xi in 0.0f64..4.0) {
            let chi = make_smooth_cutoff();
            let v = chi.chi(xi);
            prop_assert!((0.0..=1.0).contains(&v));
            if !(0.5..=2.0).contains(&xi) {
                prop_assert_eq!(v, 0.0);
            }
        }

        #[test]
        fn chi0_completes_the_partition(xi in 0.0f64..1000.0) {
            let chi = make_smooth_cutoff();
            let s = chi.chi0(xi) + (1..=14).map(|j| chi.chi(xi * 2f64.powi(-j))).sum::<f64>();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn integral_matches_quadrature() {
        let chi = make_smooth_cutoff();
        let q = simpson(|x| chi.chi(x), 0.5, 2.0, 200_000);
        assert!((q - chi.integral()).abs() < 1e-10, "{q}");
    }

    #[test]
    fn riemann_sums_track_the_integral_uniformly() {
        let chi = make_smooth_cutoff();
        let integral = simpson(|x| chi.chi(x), 0.5, 2.0, 200_000);
        for j in 4..=20 {
            let w = smooth_weights(j, &chi).unwrap();
            let s: f64 = w.values().iter().sum();
            let gap = (s - 2f64.powi(j as i32) * integral).abs();
            assert!(gap < 1.0, "j = {j}: gap {gap}");
        }
        let w5 = smooth_weights(5, &chi).unwrap();
        let s5: f64 = w5.values().iter().sum();
        assert!((s5 - 32.0 * integral).abs() < 1.0);
    }

    #[test]
    fn smooth_weight_examples() {
        let chi = make_smooth_cutoff();
        let w = smooth_weights(3, &chi).unwrap();
        assert_eq!(w.weight(8), 1.0);
        assert_eq!(w.weight(-8), 1.0);
        assert_eq!(w.weight(4), 0.0);
        assert_eq!(w.weight(16), 0.0);
        assert_eq!(w.weight(17), 0.0);

        let w0 = smooth_weights(0, &chi).unwrap();
        assert_eq!(w0.weight(0), 1.0);
        assert_eq!(w0.weight(1), 1.0);
        assert_eq!(w0.weight(2), 0.0);
    }

    #[test]
    fn smooth_tv_is_bounded_uniformly() {
        let chi = make_smooth_cutoff();
        let tvs: Vec<f64> = (4..=16)
            .map(|j| smooth_weights(j, &chi).unwrap().tv())
            .collect();
        for tv in &tvs {
            assert!(*tv <= 2.0 * chi.kappa() + 1e-12, "{tv}");
        }
        assert!(tvs.iter().all(|tv| (tv - 4.0).abs() < 1e-12));
    }

    #[test]
    fn rough_weight_examples() {
        let w = rough_weights(0).unwrap();
        assert_eq!(w.nonzero_count(), 5);
        assert_eq!(w.tv(), 2.0);

        let w = rough_weights(4).unwrap();
        assert_eq!(w.terms().filter(|&(k, _)| k > 0).count(), 24);
        assert_eq!(w.nonzero_count(), 48);
        assert_eq!(w.weight(8), 0.0);
        assert_eq!(w.weight(9), 1.0);
        assert_eq!(w.weight(32), 1.0);
        for j in 1..=12 {
            let w = rough_weights(j).unwrap();
            assert_eq!(w.tv(), 4.0);
            assert_eq!(w.nonzero_count(), 3 << j);
        }
    }

    #[test]
    fn rough_and_smooth_supports_agree() {
        let chi = make_smooth_cutoff();
        for j in 1..=5 {
            let r = rough_weights(j).unwrap();
            let s = smooth_weights(j, &chi).unwrap();
            for (k, _) in s.terms() {
                assert_eq!(r.weight(k), 1.0, "j={j} k={k}");
            }
            let outside = r.terms().filter(|&(k, _)| s.weight(k) == 0.0).count();
            assert_eq!(outside, 2, "only the closure points ±2^(j+1) differ");
        }
    }

    #[test]
    fn smooth_in_range_picks_the_largest_block() {
        let chi = make_smooth_cutoff();
        for (m, n, j) in [(1, 16, 3), (4, 64, 5), (16, 128, 6)] {
            let w = smooth_in_range(m, n, &chi).unwrap();
            assert_eq!(w.j, Some(j));
            assert_eq!((w.m, w.n), (m, n));
            assert_eq!(w.weight(1 << j), 1.0);
        }
        assert!(smooth_in_range(5, 6, &chi).is_err());
    }

    #[test]
    fn one_sided_unit_weights() {
        let w = WeightVector::unit(1, 16, Sides::PositiveOnly).unwrap();
        assert_eq!(w.nonzero_count(), 16);
        assert_eq!(w.weight(-3), 0.0);
        assert_eq!(w.tv(), 2.0);
    }
}
