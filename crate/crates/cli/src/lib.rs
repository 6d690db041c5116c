//! Command-line front end for `thetareg`: block spectra, exponent reports,
//! continued fractions, collapse checks and lower-bound probes.
//!
//! Exit codes: 0 success, 2 parse or config error, 3 precision budget
//! exceeded, 4 a `--check` gate failed, 1 anything else.

pub mod config;
pub mod output;

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use thetareg::besov::{
    block_records, fit_spectrum, predicted_exponent, records_to_csv, regularity_from_records,
    to_json, MAX_SCALE,
};
use thetareg::collapse::{gaussian_family, verify_collapse};
use thetareg::contfrac::{
    classify_sigma, default_window, expand_rational, khinchin_levy_diagnostic, KhinchinLevy,
    Parity,
};
use thetareg::cutoff::{make_smooth_cutoff, smooth_in_range};
use thetareg::exactnum::DEFAULT_GUARD_BITS;
use thetareg::thetasum::{rational_probe, stability_ratio, ProbeResult};
use thetareg::{
    BlockRecord, CFExpansion, CollapseReport, Mode, RegularityReport, ScanOptions, SigmaEstimate,
    TimeSpec, WeightVector,
};

pub use config::{FileConfig, Format, ScanConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECISION: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Collapse gates applied under `--check`.
pub const COLLAPSE_RESIDUAL_GATE: f64 = 1e-7;
pub const KAPPA_MODULUS_GATE: f64 = 1e-8;
pub const KAPPA_EIGHTH_GATE: f64 = 1e-7;
/// Stability ratios must fall in `[1/STABILITY_GATE, STABILITY_GATE]`.
pub const STABILITY_GATE: f64 = 8.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] thetareg::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_precision() => EXIT_PRECISION,
            CliError::Core(
                thetareg::Error::Parse { .. }
                | thetareg::Error::Domain(_)
                | thetareg::Error::Hypothesis(_),
            ) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "thetareg", version, about = "Dyadic-block regularity of theta sums")]
pub struct Cli {
    /// Scan configuration file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Guard bits for fixed-point phase evaluation
    #[arg(long, global = true, env = "THETA_PRECISION_GUARD")]
    pub guard: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Continued fraction: quotients, convergents, σ estimates
    Cf(CfArgs),
    /// Per-scale block sup norms, one CSV/JSON per time
    Blocks(ScanArgs),
    /// Fitted and predicted exponents, one JSON report per time
    Exponent(ScanArgs),
    /// Blocks and exponent reports in one pass
    Scan(ScanArgs),
    /// Delta-comb collapse at a rational time
    Collapse(CollapseArgs),
    /// Exhaustive lower-bound probe at a rational time
    Probe(ProbeArgs),
    /// Sup-norm ratio between two nearby times
    Stability(StabilityArgs),
}

#[derive(Args, Debug)]
pub struct CfArgs {
    /// Time, e.g. `rat:5/3` or `quad:(1+1*sqrt(5))/2`
    #[arg(long = "t", allow_hyphen_values = true)]
    pub time: String,
    /// Number of partial quotients for infinite expansions
    #[arg(long, default_value_t = 24)]
    pub depth: usize,
    /// Print JSON instead of the table
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Default)]
pub struct ScanArgs {
    /// Time to scan; repeat for several
    #[arg(long = "t", allow_hyphen_values = true)]
    pub times: Vec<String>,
    #[arg(long)]
    pub jmin: Option<u32>,
    #[arg(long)]
    pub jmax: Option<u32>,
    /// rough, smooth or both
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Grid points per Nyquist interval
    #[arg(long)]
    pub oversample: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write an SVG chart per time
    #[arg(long)]
    pub svg: bool,
    /// Exit with code 4 unless every report passes its sharpness checks
    #[arg(long)]
    pub check: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: thetareg::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Unit,
    Smooth,
}

#[derive(Args, Debug)]
pub struct CollapseArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub q: u64,
    /// Number of Gaussian test functions
    #[arg(long, default_value_t = 5)]
    pub functions: usize,
    /// Frequency cutoff of the left-hand pairing
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub check: bool,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub q: u64,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = WeightKind::Unit)]
    pub weights: WeightKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub check: bool,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[arg(long = "t", allow_hyphen_values = true)]
    pub time: String,
    #[arg(long = "t1", allow_hyphen_values = true)]
    pub time1: String,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub n: u64,
    /// `K` in the hypothesis `|t − t1| < K/N²`
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, value_enum, default_value_t = WeightKind::Unit)]
    pub weights: WeightKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub check: bool,
}

/// What a command produced, short of a hard error.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub budget_exceeded: bool,
    pub check_failures: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.budget_exceeded {
            EXIT_PRECISION
        } else if !self.check_failures.is_empty() {
            EXIT_CHECK
        } else {
            EXIT_OK
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let _ = out.write_all(outcome.stdout.as_bytes());
            for w in &outcome.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            for f in &outcome.check_failures {
                let _ = writeln!(err, "check failed: {f}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let guard = cli.guard.unwrap_or(DEFAULT_GUARD_BITS);
    match &cli.command {
        Command::Cf(a) => cmd_cf(a),
        Command::Blocks(a) => cmd_scan(&resolve(cli, a)?, guard, a.check, Emit::Blocks),
        Command::Exponent(a) => cmd_scan(&resolve(cli, a)?, guard, a.check, Emit::Report),
        Command::Scan(a) => cmd_scan(&resolve(cli, a)?, guard, a.check, Emit::Both),
        Command::Collapse(a) => cmd_collapse(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Stability(a) => cmd_stability(a, guard),
    }
}

fn resolve(cli: &Cli, a: &ScanArgs) -> Result<ScanConfig, CliError> {
    let file = match &cli.config {
        Some(path) => config::read_config(path)?,
        None => FileConfig::default(),
    };
    let flags = FileConfig {
        times: (!a.times.is_empty()).then(|| a.times.clone()),
        j_min: a.jmin,
        j_max: a.jmax,
        mode: a.mode,
        oversample: a.oversample,
        output_dir: a.out.clone(),
        format: a.format,
        emit_svg: a.svg.then_some(true),
    };
    ScanConfig::resolve(file, flags)
}

fn short_int(n: &BigInt) -> String {
    let s = n.to_string();
    if s.len() <= 40 {
        return s;
    }
    let digits = s.trim_start_matches('-').len();
    format!("{}...{} ({digits} digits)", &s[..12], &s[s.len() - 8..])
}

#[derive(Serialize)]
struct CfReport {
    time: String,
    form: &'static str,
    finite: bool,
    truncated: bool,
    quotients: Vec<String>,
    convergents: Vec<(String, String)>,
    sigma: Option<SigmaEstimate>,
    khinchin_levy: KhinchinLevy,
}

pub fn cf_expansion(t: &TimeSpec, depth: usize) -> Result<CFExpansion, CliError> {
    Ok(match t.as_rational() {
        Some(r) => expand_rational(r.numer().clone(), r.denom().clone(), Parity::Even)?,
        None => t.expansion(depth)?,
    })
}

fn cmd_cf(a: &CfArgs) -> Result<Outcome, CliError> {
    let t = TimeSpec::parse(&a.time)?;
    let exp = cf_expansion(&t, a.depth)?;
    let sigma = (!exp.is_finite()).then(|| classify_sigma(&exp, default_window(&exp)));
    let report = CfReport {
        time: t.to_string(),
        form: if exp.is_finite() { "even-length" } else { "infinite" },
        finite: exp.is_finite(),
        truncated: exp.is_truncated(),
        quotients: exp.quotients().iter().map(ToString::to_string).collect(),
        convergents: exp
            .convergents()
            .iter()
            .map(|(p, q)| (p.to_string(), q.to_string()))
            .collect(),
        sigma,
        khinchin_levy: khinchin_levy_diagnostic(&exp),
    };
    let mut out = String::new();
    if a.json {
        out = to_json(&report)? + "\n";
    } else {
        let _ = writeln!(out, "time: {}  ({} expansion)", report.time, report.form);
        let _ = writeln!(out, "{:>4}  {:>24}  {:>24}  {:>24}  {:>8}", "k", "a_k", "p_k", "q_k", "sigma_k");
        let per_n = report.sigma.as_ref().map(|s| s.per_n.as_slice()).unwrap_or(&[]);
        for (k, (a_k, (p, q))) in exp.quotients().iter().zip(exp.convergents()).enumerate() {
            let s = per_n
                .iter()
                .find(|(n, _)| *n == k)
                .map(|(_, s)| format!("{s:.4}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{k:>4}  {:>24}  {:>24}  {:>24}  {s:>8}",
                short_int(a_k),
                short_int(p),
                short_int(q)
            );
        }
        if exp.is_truncated() {
            let _ = writeln!(out, "expansion truncated at the size cap");
        }
        if let Some(s) = &report.sigma {
            let _ = writeln!(
                out,
                "sigma: limsup {:.4}  liminf {:.4}  verdict {:?}",
                s.limsup_est, s.liminf_est, s.verdict
            );
        }
        if let Some(&(n, v)) = report.khinchin_levy.points.last() {
            let _ = writeln!(
                out,
                "Khinchin-Levy: ln(q_n)/n = {v:.4} at n = {n}, reference {:.4}",
                report.khinchin_levy.reference
            );
        }
    }
    Ok(Outcome {
        stdout: out,
        ..Default::default()
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Emit {
    Blocks,
    Report,
    Both,
}

#[derive(Serialize)]
struct BlocksFile<'a> {
    time: String,
    mode: Mode,
    j_min: u32,
    j_max: u32,
    records: &'a [BlockRecord],
    warnings: &'a [String],
}

struct TimeRun {
    records: Vec<BlockRecord>,
    warning: Option<String>,
    budget: bool,
}

/// Records for every scale of the config, stopping at the first scale the
/// precision budget refuses.
fn measure(t: &TimeSpec, cfg: &ScanConfig, opts: &ScanOptions) -> Result<TimeRun, CliError> {
    let (top, cut) = cfg.budget_scales();
    let results: Vec<thetareg::Result<BlockRecord>> = (cfg.j_min..=top)
        .into_par_iter()
        .map(|j| block_records(t, &[j], cfg.mode, opts).map(|mut v| v.remove(0)))
        .collect();
    let mut records = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if e.is_precision() => {
                return Ok(TimeRun {
                    records,
                    warning: Some(format!("{t}: {e}; output is partial")),
                    budget: true,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let warning = cut.then(|| {
        format!(
            "{t}: scales {}..={} exceed the precision budget ceiling {MAX_SCALE}; output is partial",
            top.max(cfg.j_min - 1) + 1,
            cfg.j_max
        )
    });
    Ok(TimeRun {
        records,
        warning,
        budget: cut,
    })
}

struct TimeResult {
    summary: String,
    warning: Option<String>,
    budget: bool,
    check_failure: Option<String>,
}

fn run_time(t: &TimeSpec, cfg: &ScanConfig, opts: &ScanOptions, emit: Emit) -> Result<TimeResult, CliError> {
    let run = measure(t, cfg, opts)?;
    let slug = t.slug();
    let dir = &cfg.output_dir;
    let warnings: Vec<String> = run.warning.iter().cloned().collect();
    let mut summary = format!("{t}: {} scales", run.records.len());
    let mut check_failure = None;

    if emit != Emit::Report {
        if cfg.format.csv() {
            output::write_atomic(&dir.join(format!("{slug}.csv")), &records_to_csv(&run.records))?;
        }
        if cfg.format.json() {
            let file = BlocksFile {
                time: t.to_string(),
                mode: cfg.mode,
                j_min: cfg.j_min,
                j_max: cfg.j_max,
                records: &run.records,
                warnings: &warnings,
            };
            output::write_atomic(&dir.join(format!("{slug}.json")), &(to_json(&file)? + "\n"))?;
        }
        if let Some(w) = &run.warning {
            output::write_atomic(&dir.join(format!("{slug}.warnings.txt")), &format!("{w}\n"))?;
        }
        let floors_missed: Vec<u32> = run
            .records
            .iter()
            .filter(|r| matches!((r.rough_sup, r.probe_floor), (Some(s), Some(f)) if s < f))
            .map(|r| r.j)
            .collect();
        if !floors_missed.is_empty() {
            check_failure = Some(format!("{t}: probe floor missed at j = {floors_missed:?}"));
        }
    }

    let mut fit = None;
    let mut pred = None;
    if emit != Emit::Blocks {
        let last = run.records.last().map(|r| r.j).unwrap_or(cfg.j_min);
        let report: RegularityReport = match regularity_from_records(t, run.records.clone(), cfg.j_min, last) {
            Ok(r) => r,
            Err(e) if run.budget => {
                return Ok(TimeResult {
                    summary: format!("{t}: no report ({e})"),
                    warning: run.warning,
                    budget: true,
                    check_failure: None,
                })
            }
            Err(e) => return Err(e.into()),
        };
        output::write_atomic(&dir.join(format!("{slug}.report.json")), &(to_json(&report)? + "\n"))?;
        let _ = write!(
            summary,
            ", alpha_fit {:.4}, alpha_limsup {:.4}, predicted [{}, {}], sharp {}",
            report.alpha_fit, report.alpha_limsup, report.alpha_pred.lo, report.alpha_pred.hi, report.sharp()
        );
        check_failure = (!report.sharp()).then(|| {
            format!(
                "{t}: sharpness checks failed (member {}, below {})",
                report.sharp_member, report.sharp_below
            )
        });
        fit = Some(report.alpha_fit);
        pred = report.alpha_pred.value();
    } else if run.records.len() >= 5 {
        fit = fit_spectrum(&run.records, cfg.j_min).ok().map(|f| f.alpha_fit);
        pred = predicted_exponent(t, None).value();
    }
    if cfg.emit_svg {
        let svg = output::spectrum_svg(&t.to_string(), &run.records, fit, pred);
        output::write_atomic(&dir.join(format!("{slug}.svg")), &svg)?;
    }
    Ok(TimeResult {
        summary,
        warning: run.warning,
        budget: run.budget,
        check_failure,
    })
}

fn cmd_scan(cfg: &ScanConfig, guard: u32, check: bool, emit: Emit) -> Result<Outcome, CliError> {
    let opts = ScanOptions {
        oversample: cfg.oversample,
        guard,
        ..ScanOptions::default()
    };
    let results: Vec<Result<TimeResult, CliError>> = cfg
        .times
        .par_iter()
        .map(|t| run_time(t, cfg, &opts, emit))
        .collect();
    let mut outcome = Outcome::default();
    for r in results {
        let r = r?;
        let _ = writeln!(outcome.stdout, "{}", r.summary);
        outcome.warnings.extend(r.warning);
        outcome.budget_exceeded |= r.budget;
        if check {
            outcome.check_failures.extend(r.check_failure);
        }
    }
    Ok(outcome)
}

fn emit_json<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<String, CliError> {
    let text = to_json(value)? + "\n";
    if let Some(path) = out {
        output::write_atomic(path, &text)?;
    }
    Ok(text)
}

/// Failed collapse gates, empty when the report passes. NaN fails every gate.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn collapse_gate_failures(r: &CollapseReport) -> Vec<String> {
    let kappa = num_complex::Complex64::new(r.kappa_re, r.kappa_im);
    let mut out = Vec::new();
    if !(r.max_residual < COLLAPSE_RESIDUAL_GATE) {
        out.push(format!("{}/{}: residual {:e}", r.p, r.q, r.max_residual));
    }
    if !((kappa.norm() - 1.0).abs() < KAPPA_MODULUS_GATE) {
        out.push(format!("{}/{}: |kappa| = {}", r.p, r.q, kappa.norm()));
    }
    if !((kappa.powi(8) - 1.0).norm() < KAPPA_EIGHTH_GATE) {
        out.push(format!("{}/{}: kappa^8 = {}", r.p, r.q, kappa.powi(8)));
    }
    out
}

fn cmd_collapse(a: &CollapseArgs) -> Result<Outcome, CliError> {
    if a.functions == 0 {
        return Err(CliError::Config("at least one test function is needed".into()));
    }
    let report = verify_collapse(a.p, a.q, &gaussian_family(a.functions), a.n)?;
    Ok(Outcome {
        stdout: emit_json(&report, &a.out)?,
        check_failures: if a.check { collapse_gate_failures(&report) } else { Vec::new() },
        ..Default::default()
    })
}

fn weights_for(kind: WeightKind, m: u64, n: u64) -> Result<WeightVector, CliError> {
    Ok(match kind {
        WeightKind::Unit => WeightVector::unit(m, n, thetareg::Sides::Both)?,
        WeightKind::Smooth => smooth_in_range(m, n, &make_smooth_cutoff())?,
    })
}

#[derive(Serialize)]
struct ProbeReport {
    weights: WeightKind,
    #[serde(flatten)]
    result: ProbeResult,
    /// `value − floor` for each floor, in order.
    margins: Vec<f64>,
    all_hold: bool,
}

fn cmd_probe(a: &ProbeArgs) -> Result<Outcome, CliError> {
    let w = weights_for(a.weights, a.m, a.n)?;
    let result = rational_probe(a.p, a.q, &w)?;
    let margins = result.floors.iter().map(|f| result.value - f.floor).collect();
    let report = ProbeReport {
        weights: a.weights,
        all_hold: result.all_hold(),
        margins,
        result,
    };
    let failures = if a.check && !report.all_hold {
        vec![format!("{}/{}: a lower bound is not met", a.p, a.q)]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        stdout: emit_json(&report, &a.out)?,
        check_failures: failures,
        ..Default::default()
    })
}

#[derive(Serialize)]
struct StabilityReport {
    t: String,
    t1: String,
    m: u64,
    n: u64,
    k: f64,
    weights: WeightKind,
    sup_t: f64,
    sup_t1: f64,
    ratio: f64,
    within_gate: bool,
}

fn cmd_stability(a: &StabilityArgs, guard: u32) -> Result<Outcome, CliError> {
    let t = TimeSpec::parse(&a.time)?;
    let t1 = TimeSpec::parse(&a.time1)?;
    let w = weights_for(a.weights, a.m, a.n)?;
    let r = stability_ratio(&t, &t1, &w, a.k, guard)?;
    let within_gate = r.ratio >= 1.0 / STABILITY_GATE && r.ratio <= STABILITY_GATE;
    let report = StabilityReport {
        t: t.to_string(),
        t1: t1.to_string(),
        m: a.m,
        n: a.n,
        k: a.k,
        weights: a.weights,
        sup_t: r.sup_t,
        sup_t1: r.sup_t1,
        ratio: r.ratio,
        within_gate,
    };
    let failures = if a.check && !within_gate {
        vec![format!("ratio {} outside [1/{STABILITY_GATE}, {STABILITY_GATE}]", r.ratio)]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        stdout: emit_json(&report, &a.out)?,
        check_failures: failures,
        ..Default::default()
    })
}
