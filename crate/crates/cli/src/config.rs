//! Flat `key = value` scan configuration with a `[times]` section.
//!
//! ```text
//! jmin = 4
//! jmax = 12
//! mode = rough
//! # one time per line
//! [times]
//! rat:1/3
//! quad:(-1+1*sqrt(5))/2
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thetareg::besov::MAX_SCALE;
use thetareg::{Mode, TimeSpec};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "both" => Ok(Format::Both),
            _ => Err(format!("format must be csv, json or both, got `{s}`")),
        }
    }
}

/// Settings read from a config file; every field is optional so that flags
/// can fill the gaps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FileConfig {
    pub times: Option<Vec<String>>,
    pub j_min: Option<u32>,
    pub j_max: Option<u32>,
    pub mode: Option<Mode>,
    pub oversample: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub emit_svg: Option<bool>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

fn number<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| bad(line, format!("`{key}` expects an integer, got `{value}`")))
}

pub fn parse_config(text: &str) -> Result<FileConfig, CliError> {
    let mut cfg = FileConfig::default();
    let mut in_times = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if content != "[times]" {
                return Err(bad(line, format!("unknown section `{content}`")));
            }
            in_times = true;
            cfg.times.get_or_insert_with(Vec::new);
            continue;
        }
        if in_times {
            cfg.times.get_or_insert_with(Vec::new).push(content.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| bad(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "jmin" | "j_min" => cfg.j_min = Some(number(line, key, value)?),
            "jmax" | "j_max" => cfg.j_max = Some(number(line, key, value)?),
            "oversample" => cfg.oversample = Some(number(line, key, value)?),
            "mode" => cfg.mode = Some(value.parse().map_err(|e| bad(line, e))?),
            "format" => cfg.format = Some(value.parse().map_err(|e| bad(line, e))?),
            "out" | "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
            "svg" | "emit_svg" => {
                cfg.emit_svg = Some(match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(bad(line, format!("`{key}` expects true or false"))),
                })
            }
            _ => return Err(bad(line, format!("unknown key `{key}`"))),
        }
    }
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub times: Vec<TimeSpec>,
    pub j_min: u32,
    pub j_max: u32,
    pub mode: Mode,
    pub oversample: usize,
    pub output_dir: PathBuf,
    pub format: Format,
    pub emit_svg: bool,
}

impl ScanConfig {
    /// Overlays `flags` on `file` and validates the result.
    pub fn resolve(file: FileConfig, flags: FileConfig) -> Result<Self, CliError> {
        let times = flags.times.or(file.times).unwrap_or_default();
        let times = times
            .iter()
            .map(|t| TimeSpec::parse(t).map_err(|e| CliError::Config(format!("time `{t}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = ScanConfig {
            times,
            j_min: flags.j_min.or(file.j_min).unwrap_or(4),
            j_max: flags.j_max.or(file.j_max).unwrap_or(12),
            mode: flags.mode.or(file.mode).unwrap_or(Mode::Rough),
            oversample: flags.oversample.or(file.oversample).unwrap_or(8),
            output_dir: flags.output_dir.or(file.output_dir).unwrap_or_else(|| "out".into()),
            format: flags.format.or(file.format).unwrap_or(Format::Both),
            emit_svg: flags.emit_svg.or(file.emit_svg).unwrap_or(false),
        };
        if cfg.j_min < 1 {
            return Err(CliError::Config("jmin must be at least 1".into()));
        }
        if cfg.j_max < cfg.j_min {
            return Err(CliError::Config(format!(
                "jmax = {} is below jmin = {}",
                cfg.j_max, cfg.j_min
            )));
        }
        if cfg.oversample < 4 {
            return Err(CliError::Config("oversample must be at least 4".into()));
        }
        Ok(cfg)
    }

    /// Scales inside the precision budget, and whether any were cut off.
    pub fn budget_scales(&self) -> (u32, bool) {
        (self.j_max.min(MAX_SCALE), self.j_max > MAX_SCALE)
    }
}
