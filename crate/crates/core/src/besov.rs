//! Per-scale block norms, fitted decay exponents, predicted exponents and
//! sharpness verdicts.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::contfrac::{
    best_convergent_for_scale, classify_sigma, default_window, ln_big, SigmaClass, TimeSpec,
};
use crate::cutoff::{make_smooth_cutoff, rough_weights, smooth_weights};
use crate::error::{Error, Result};
use crate::exactnum::DEFAULT_GUARD_BITS;
use crate::thetasum::{
    rational_probe, sup_norm, SumSpec, DEFAULT_OVERSAMPLE, DEFAULT_REFINE_ITERS, PROBE_BUDGET,
};

/// Tolerance for the sharpness checks.
pub const SHARP_EPSILON: f64 = 0.1;
/// Largest scale the default precision budget covers.
pub const MAX_SCALE: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rough,
    Smooth,
    Both,
}

impl Mode {
    fn rough(self) -> bool {
        matches!(self, Mode::Rough | Mode::Both)
    }

    fn smooth(self) -> bool {
        matches!(self, Mode::Smooth | Mode::Both)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rough" => Ok(Mode::Rough),
            "smooth" => Ok(Mode::Smooth),
            "both" => Ok(Mode::Both),
            _ => Err(Error::Parse {
                pos: 0,
                msg: format!("mode must be rough, smooth or both, got `{s}`"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanOptions {
    pub oversample: usize,
    pub refine_iters: usize,
    pub guard: u32,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            oversample: DEFAULT_OVERSAMPLE,
            refine_iters: DEFAULT_REFINE_ITERS,
            guard: DEFAULT_GUARD_BITS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockRecord {
    pub j: u32,
    pub rough_sup: Option<f64>,
    pub smooth_sup: Option<f64>,
    /// Exact rough-block `L²` norm, `√(#terms)`.
    pub l2_exact: f64,
    pub term_count: u64,
    #[serde(serialize_with = "as_string")]
    pub q_used: BigInt,
    /// `#terms/√q + √q`.
    pub upper_bound_pred: f64,
    /// Exhaustive rational probe maximum, when one was run.
    pub probe_value: Option<f64>,
    /// Lower bound the probe guarantees, `#terms/√(2q)`.
    pub probe_floor: Option<f64>,
    /// Whether the scale sits at a predicted burst.
    pub burst: bool,
}

fn as_string<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl BlockRecord {
    /// The rough sup if measured, otherwise the smooth one.
    pub fn sup(&self) -> Option<f64> {
        self.rough_sup.or(self.smooth_sup)
    }

    pub fn log2_sup_over_j(&self) -> Option<f64> {
        self.sup()
            .filter(|_| self.j > 0)
            .map(|s| s.log2() / self.j as f64)
    }
}

fn q_for_scale(t: &TimeSpec, j: u32) -> Result<(BigInt, Option<(u64, u64)>)> {
    if let Some(r) = t.as_rational() {
        let pq = match (r.numer().to_u64(), r.denom().to_u64()) {
            (Some(p), Some(q)) => Some((p, q)),
            _ => None,
        };
        return Ok((r.denom().clone(), pq));
    }
    let exp = t.expansion(64 + 4 * j as usize)?;
    let (_, q) = best_convergent_for_scale(&exp, 2f64.powi(j as i32))
        .ok_or_else(|| Error::PrecisionExhausted(format!("{t} has no convergents")))?;
    Ok((q, None))
}

fn record(t: &TimeSpec, j: u32, mode: Mode, opts: &ScanOptions) -> Result<BlockRecord> {
    if j > MAX_SCALE {
        return Err(Error::Budget(format!(
            "scale j = {j} exceeds the precision budget ceiling {MAX_SCALE}"
        )));
    }
    let rough = rough_weights(j)?;
    let term_count = rough.nonzero_count();
    let l2_exact = rough.l2_squared().sqrt();
    let (q_used, pq) = q_for_scale(t, j)?;
    let qf = ln_big(&q_used).mul_add(0.5, 0.0).exp();
    let upper_bound_pred = term_count as f64 / qf + qf;

    let mut probe_value = None;
    let mut probe_floor = None;
    let mut rough_sup = None;
    if mode.rough() {
        let spec = SumSpec::new(t.clone(), rough.clone()).with_guard(opts.guard);
        let mut best = sup_norm(&spec, opts.oversample, opts.refine_iters)?.value;
        if let Some((p, q)) = pq.filter(|&(_, q)| q <= PROBE_BUDGET) {
            let probe = rational_probe(p, q, &rough)?;
            best = best.max(probe.value);
            probe_value = Some(probe.value);
            probe_floor = Some(term_count as f64 / (2.0 * q as f64).sqrt());
        }
        rough_sup = Some(best);
    }
    let smooth_sup = if mode.smooth() {
        let w = smooth_weights(j, &make_smooth_cutoff())?;
        let spec = SumSpec::new(t.clone(), w.clone()).with_guard(opts.guard);
        let mut best = sup_norm(&spec, opts.oversample, opts.refine_iters)?.value;
        if let Some((p, q)) = pq.filter(|&(_, q)| q <= PROBE_BUDGET) {
            best = best.max(rational_probe(p, q, &w)?.value);
        }
        Some(best)
    } else {
        None
    };
    Ok(BlockRecord {
        j,
        rough_sup,
        smooth_sup,
        l2_exact,
        term_count,
        q_used,
        upper_bound_pred,
        probe_value,
        probe_floor,
        burst: false,
    })
}

/// Records for the given scales, in ascending `j`.
pub fn block_records(t: &TimeSpec, js: &[u32], mode: Mode, opts: &ScanOptions) -> Result<Vec<BlockRecord>> {
    let mut js = js.to_vec();
    js.sort_unstable();
    js.dedup();
    js.par_iter().map(|&j| record(t, j, mode, opts)).collect()
}

/// One record per `j` in `j_min..=j_max`.
pub fn block_spectrum(t: &TimeSpec, j_min: u32, j_max: u32, mode: Mode, opts: &ScanOptions) -> Result<Vec<BlockRecord>> {
    let js: Vec<u32> = (j_min..=j_max).collect();
    block_records(t, &js, mode, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Least-squares slope of `log₂ sup` against `j`.
    pub alpha_fit: f64,
    /// `max_j log₂(sup_j)/j` over the tail.
    pub alpha_limsup: f64,
    /// Largest absolute residual of the least-squares line.
    pub residual: f64,
}

/// Fits `(j, sup_j)` pairs with `j ≥ tail_start`.
pub fn fit_exponent(points: &[(u32, f64)], tail_start: u32) -> Result<ExponentFit> {
    let tail: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(j, _)| j >= tail_start && j > 0)
        .map(|&(j, s)| (j as f64, s))
        .collect();
    if tail.len() < 5 {
        return Err(Error::Degenerate(format!(
            "{} tail records; at least 5 are needed",
            tail.len()
        )));
    }
    if tail.iter().any(|&(_, s)| s.is_nan() || s <= 0.0 || s.is_infinite()) {
        return Err(Error::Degenerate("non-positive block norm".into()));
    }
    let ys: Vec<f64> = tail.iter().map(|&(_, s)| s.log2()).collect();
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().zip(&ys).map(|(p, y)| (p.0 - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = tail
        .iter()
        .zip(&ys)
        .map(|(p, y)| (y - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    let alpha_limsup = tail
        .iter()
        .zip(&ys)
        .map(|(p, y)| y / p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ExponentFit {
        alpha_fit: slope,
        alpha_limsup,
        residual,
    })
}

/// Fits the rough sups (smooth when rough is absent) of a spectrum.
pub fn fit_spectrum(records: &[BlockRecord], tail_start: u32) -> Result<ExponentFit> {
    let points: Vec<(u32, f64)> = records
        .iter()
        .filter_map(|r| r.sup().map(|s| (r.j, s)))
        .collect();
    fit_exponent(&points, tail_start)
}

/// Predicted decay exponent: a point, or the interval `[1/2, 1]` when the
/// class is unknown.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub lo: f64,
    pub hi: f64,
    pub provenance: String,
}

impl Prediction {
    fn point(alpha: f64, provenance: impl Into<String>) -> Self {
        Self {
            lo: alpha,
            hi: alpha,
            provenance: provenance.into(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        (self.lo == self.hi).then_some(self.lo)
    }
}

pub fn predicted_exponent(t: &TimeSpec, sigma: Option<&SigmaClass>) -> Prediction {
    if t.as_rational().is_some() {
        return Prediction::point(1.0, "rational time");
    }
    if t.has_bounded_quotients() {
        return Prediction::point(0.5, "bounded partial quotients");
    }
    if let TimeSpec::Class(rule) = t {
        let s = rule.sigma;
        return Prediction::point((1.0 + s) / (2.0 + s), format!("class I({s}) by construction"));
    }
    match sigma {
        Some(SigmaClass::Exactly(s)) => {
            Prediction::point((1.0 + s) / (2.0 + s), format!("estimated class I({s:.3})"))
        }
        _ => Prediction {
            lo: 0.5,
            hi: 1.0,
            provenance: "class unknown; universal range".into(),
        },
    }
}

/// The `σ` used to place bursts: known for constructed times, estimated otherwise.
fn sigma_for_bursts(t: &TimeSpec, verdict: Option<&SigmaClass>, limsup: f64) -> f64 {
    match t {
        TimeSpec::Class(rule) => rule.sigma,
        _ if t.has_bounded_quotients() => 0.0,
        _ => match verdict {
            Some(SigmaClass::Exactly(s)) => *s,
            _ if limsup.is_finite() => limsup.max(0.0),
            _ => 0.0,
        },
    }
}

/// Scales `⌈s_n(2+σ)/2⌉` with `s_n = log₂ q_n`, inside `[j_min, j_max]`.
pub fn burst_scales(t: &TimeSpec, sigma: f64, j_min: u32, j_max: u32) -> Result<Vec<u32>> {
    if t.as_rational().is_some() {
        return Ok(Vec::new());
    }
    let exp = t.expansion(64 + 4 * j_max as usize)?;
    let mut out: Vec<u32> = exp
        .denominators()
        .filter(|q| **q > BigInt::one())
        .map(|q| {
            let s = ln_big(q) / std::f64::consts::LN_2;
            (s * (2.0 + sigma) / 2.0).ceil()
        })
        .filter(|&j| j >= j_min as f64 && j <= j_max as f64)
        .map(|j| j as u32)
        .collect();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub time: String,
    pub alpha_fit: f64,
    pub alpha_limsup: f64,
    pub residual: f64,
    pub alpha_pred: Prediction,
    pub class: Option<SigmaClass>,
    pub sigma_limsup: Option<f64>,
    pub sigma_liminf: Option<f64>,
    /// Norms grow no faster than `2^{(α+ε)j}` on the fitted range.
    pub sharp_member: bool,
    /// Norms reach `2^{(α−ε)j}` along the probed scales.
    pub sharp_below: bool,
    pub burst_scales: Vec<u32>,
    pub records: Vec<BlockRecord>,
}

impl RegularityReport {
    pub fn sharp(&self) -> bool {
        self.sharp_member && self.sharp_below
    }
}

/// Full report over `j_min..=j_max` plus the burst scales of irrational times.
pub fn classify_regularity(t: &TimeSpec, j_min: u32, j_max: u32, opts: &ScanOptions) -> Result<RegularityReport> {
    check_range(j_min, j_max)?;
    let records = block_spectrum(t, j_min, j_max, Mode::Rough, opts)?;
    regularity_from_records(t, records, j_min, j_max)
}

fn check_range(j_min: u32, j_max: u32) -> Result<()> {
    if j_max < j_min + 4 {
        return Err(Error::Domain(format!(
            "scale range {j_min}..={j_max} has fewer than 5 scales"
        )));
    }
    Ok(())
}

/// Builds the report from records already measured on `j_min..=j_max`.
pub fn regularity_from_records(
    t: &TimeSpec,
    records: Vec<BlockRecord>,
    j_min: u32,
    j_max: u32,
) -> Result<RegularityReport> {
    check_range(j_min, j_max)?;
    let (class, sigma_limsup, sigma_liminf) = if t.as_rational().is_some() {
        (None, None, None)
    } else {
        let exp = t.expansion(64 + 4 * j_max as usize)?;
        let est = classify_sigma(&exp, default_window(&exp));
        let finite = |v: f64| v.is_finite().then_some(v);
        (Some(est.verdict), finite(est.limsup_est), finite(est.liminf_est))
    };
    let sigma = sigma_for_bursts(t, class.as_ref(), sigma_limsup.unwrap_or(f64::NAN));
    let bursts = burst_scales(t, sigma, j_min, j_max)?;
    let records: Vec<BlockRecord> = records
        .into_iter()
        .map(|mut r| {
            r.burst = bursts.contains(&r.j);
            r
        })
        .collect();
    let fit = fit_spectrum(&records, j_min)?;
    let alpha_pred = predicted_exponent(t, class.as_ref());
    Ok(RegularityReport {
        time: t.to_string(),
        alpha_fit: fit.alpha_fit,
        alpha_limsup: fit.alpha_limsup,
        residual: fit.residual,
        sharp_member: fit.alpha_fit <= alpha_pred.hi + SHARP_EPSILON,
        sharp_below: fit.alpha_limsup >= alpha_pred.lo - SHARP_EPSILON,
        alpha_pred,
        class,
        sigma_limsup,
        sigma_liminf,
        burst_scales: bursts,
        records,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: &str = "j,rough_sup,smooth_sup,l2_exact,q_used,upper_bound_pred,log2_sup_over_j";

/// CSV with shortest round-trip float formatting.
pub fn records_to_csv(records: &[BlockRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.j,
            cell(r.rough_sup),
            cell(r.smooth_sup),
            r.l2_exact,
            r.q_used,
            r.upper_bound_pred,
            cell(r.log2_sup_over_j())
        );
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Domain(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> TimeSpec {
        TimeSpec::rational(p, q).unwrap()
    }

    #[test]
    fn synthetic_fits() {
        let pts: Vec<(u32, f64)> = (4..12).map(|j| (j, 2f64.powf(0.5 * j as f64))).collect();
        let f = fit_exponent(&pts, 4).unwrap();
        assert!((f.alpha_fit - 0.5).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!((f.alpha_limsup - 0.5).abs() < 1e-12);

        let pts: Vec<(u32, f64)> = (4..12).map(|j| (j, 2f64.powi(j as i32) / 7f64.sqrt())).collect();
        let f = fit_exponent(&pts, 4).unwrap();
        assert!((f.alpha_fit - 1.0).abs() < 1e-12);

        assert!(fit_exponent(&pts, 9).is_err());
        let zeros: Vec<(u32, f64)> = (4..12).map(|j| (j, 0.0)).collect();
        assert!(matches!(fit_exponent(&zeros, 4), Err(Error::Degenerate(_))));
    }

    #[test]
    fn predictions() {
        assert_eq!(predicted_exponent(&rat(3, 5), None).value(), Some(1.0));
        let g = TimeSpec::parse("quad:(-1+1*sqrt(5))/2").unwrap();
        assert_eq!(predicted_exponent(&g, None).value(), Some(0.5));
        let c0 = TimeSpec::parse("class:sigma=0,seed=0,1").unwrap();
        assert_eq!(predicted_exponent(&c0, None).value(), Some(0.5));
        let c1 = TimeSpec::parse("class:sigma=1,seed=0,2").unwrap();
        assert!((predicted_exponent(&c1, None).value().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let c2 = TimeSpec::parse("class:sigma=2,seed=0,2").unwrap();
        assert!((predicted_exponent(&c2, None).value().unwrap() - 0.75).abs() < 1e-15);
        let lit = TimeSpec::parse("dec:0.12345678901234567890123").unwrap();
        let p = predicted_exponent(&lit, Some(&SigmaClass::Indeterminate));
        assert_eq!((p.lo, p.hi), (0.5, 1.0));
    }

    #[test]
    fn parseval_count_is_exact() {
        let recs = block_spectrum(&rat(1, 3), 1, 8, Mode::Rough, &ScanOptions::default()).unwrap();
        for r in &recs {
            assert_eq!(r.term_count, 3 << r.j);
            let c = r.term_count as f64;
            assert!((r.l2_exact * r.l2_exact - c).abs() <= 1e-10 * c);
        }
        assert_eq!(recs.last().unwrap().l2_exact, 768f64.sqrt());
    }

    #[test]
    fn one_third_at_scale_eight() {
        let r = &block_records(&rat(1, 3), &[8], Mode::Both, &ScanOptions::default()).unwrap()[0];
        let s3 = 3f64.sqrt();
        let rough = r.rough_sup.unwrap();
        assert!(rough >= 2f64.sqrt() * (3.0 * 128.0) / s3 * (1.0 - 1e-12));
        assert!(rough / (768.0 / s3 + s3) <= 10.0);
        assert!(r.smooth_sup.unwrap() > 0.0);
        assert!(rough >= r.probe_value.unwrap());
        assert_eq!(r.q_used, BigInt::from(3));
    }

    #[test]
    fn merged_probe_never_lowers() {
        let opts = ScanOptions::default();
        let t = rat(7, 13);
        let r = &block_records(&t, &[7], Mode::Rough, &opts).unwrap()[0];
        let spec = SumSpec::new(t, rough_weights(7).unwrap());
        let plain = sup_norm(&spec, opts.oversample, opts.refine_iters).unwrap().value;
        assert!(r.rough_sup.unwrap() >= plain);
    }

    #[test]
    fn golden_blocks_scale_like_square_root() {
        let g = TimeSpec::parse("quad:(-1+1*sqrt(5))/2").unwrap();
        let recs = block_spectrum(&g, 8, 13, Mode::Rough, &ScanOptions::default()).unwrap();
        let ratios: Vec<f64> = recs
            .iter()
            .map(|r| r.rough_sup.unwrap() / 2f64.powf(r.j as f64 / 2.0))
            .collect();
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 3.0, "{ratios:?}");
    }

    #[test]
    fn burst_scales_for_class_one() {
        let t = TimeSpec::parse("class:sigma=1,seed=0,2").unwrap();
        // q_n = 2, 5, 27, 734, 538783, ...
        assert_eq!(burst_scales(&t, 1.0, 1, 20).unwrap(), vec![2, 4, 8, 15]);
        assert!(burst_scales(&rat(1, 3), 0.0, 1, 20).unwrap().is_empty());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let recs = block_spectrum(&rat(3, 5), 3, 5, Mode::Both, &ScanOptions::default()).unwrap();
        let csv = records_to_csv(&recs);
        let json: serde_json::Value = serde_json::from_str(&to_json(&recs).unwrap()).unwrap();
        for (line, rec) in csv.lines().skip(1).zip(json.as_array().unwrap()) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 7);
            let rough: f64 = cells[1].parse().unwrap();
            assert_eq!(rough, rec["rough_sup"].as_f64().unwrap());
            let smooth: f64 = cells[2].parse().unwrap();
            assert_eq!(smooth, rec["smooth_sup"].as_f64().unwrap());
            assert_eq!(cells[4], rec["q_used"].as_str().unwrap());
        }
    }

    #[test]
    fn regularity_of_a_rational() {
        let rep = classify_regularity(&rat(3, 5), 4, 10, &ScanOptions::default()).unwrap();
        assert_eq!(rep.alpha_pred.value(), Some(1.0));
        assert!(rep.class.is_none());
        assert!((rep.alpha_fit - 1.0).abs() < 0.1, "{}", rep.alpha_fit);
        assert!(rep.sharp());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("both".parse::<Mode>().unwrap(), Mode::Both);
        assert!("neither".parse::<Mode>().is_err());
    }
}
