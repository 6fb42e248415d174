//! Run parameters: command-line values merged over an optional flat
//! `key = value` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Parameters shared by every subcommand. Unset values fall back to the
/// config file, then to the subcommand's default.
#[derive(Args, Clone, Debug, Default)]
pub struct Params {
    /// Flat `key = value` file merged under the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub seed: Option<u64>,
    /// Replica count
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Support half-width M of the profile
    #[arg(long = "m", alias = "M", global = true, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Horizon T
    #[arg(long = "t", alias = "T", global = true, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dy: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x_max: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub n_eig: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub l: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub u: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub v: Option<f64>,
    /// Outer Brownian paths of the D_s estimators
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub outer: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Worker threads (default: available cores)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub threads: Option<usize>,
}

pub const KEYS: &[&str] = &[
    "seed", "n", "beta", "m", "t", "s", "dt", "dy", "h", "x_max", "n_eig", "l", "mu", "u", "v", "outer", "out", "format",
    "threads",
];

/// Parses `key = value` lines; `#` starts a comment. Keys are case-insensitive
/// and `-` is read as `_`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().to_lowercase().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key {key:?}", i + 1)));
        }
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Validation(format!("{key} = {value:?} is not a valid value")))
}

fn fill<T: std::str::FromStr>(slot: &mut Option<T>, map: &BTreeMap<String, String>, key: &str) -> Result<(), CliError> {
    if slot.is_none() {
        if let Some(v) = map.get(key) {
            *slot = Some(parse(key, v)?);
        }
    }
    Ok(())
}

impl Params {
    /// Fills unset fields from the config file, if one was given.
    pub fn merge_config(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.merge_map(&parse_config(&text)?)?;
        Ok(self)
    }

    pub fn merge_map(&mut self, map: &BTreeMap<String, String>) -> Result<(), CliError> {
        fill(&mut self.seed, map, "seed")?;
        fill(&mut self.n, map, "n")?;
        fill(&mut self.beta, map, "beta")?;
        fill(&mut self.m, map, "m")?;
        fill(&mut self.t, map, "t")?;
        fill(&mut self.s, map, "s")?;
        fill(&mut self.dt, map, "dt")?;
        fill(&mut self.dy, map, "dy")?;
        fill(&mut self.h, map, "h")?;
        fill(&mut self.x_max, map, "x_max")?;
        fill(&mut self.n_eig, map, "n_eig")?;
        fill(&mut self.l, map, "l")?;
        fill(&mut self.mu, map, "mu")?;
        fill(&mut self.u, map, "u")?;
        fill(&mut self.v, map, "v")?;
        fill(&mut self.outer, map, "outer")?;
        fill(&mut self.threads, map, "threads")?;
        if self.out.is_none() {
            self.out = map.get("out").map(PathBuf::from);
        }
        if self.format.is_none() {
            if let Some(v) = map.get("format") {
                self.format = Some(
                    Format::from_str(v, true).map_err(|_| CliError::Validation(format!("format = {v:?}: expected csv or json")))?,
                );
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn n_or(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0)
    }

    pub fn m(&self) -> f64 {
        self.m.unwrap_or(1.0)
    }

    pub fn t(&self) -> f64 {
        self.t.unwrap_or(4.0)
    }

    pub fn s(&self) -> f64 {
        self.s.unwrap_or(0.5)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(1.0 / 1024.0)
    }

    pub fn dy(&self) -> f64 {
        self.dy.unwrap_or(1.0 / 64.0)
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or(1e-3)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max.unwrap_or(20.0)
    }

    pub fn n_eig(&self) -> usize {
        self.n_eig.unwrap_or(8)
    }

    pub fn l(&self) -> f64 {
        self.l.unwrap_or(1.0)
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or(0.0)
    }

    pub fn u(&self) -> f64 {
        self.u.unwrap_or(4.0)
    }

    pub fn v(&self) -> f64 {
        self.v.unwrap_or(1.0)
    }

    pub fn outer(&self) -> usize {
        self.outer.unwrap_or(10_000)
    }

    /// Rejects values that no operation accepts.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("beta", self.beta),
            ("m", self.m),
            ("t", self.t),
            ("dt", self.dt),
            ("dy", self.dy),
            ("h", self.h),
            ("x_max", self.x_max),
            ("l", self.l),
            ("v", self.v),
        ];
        for (k, v) in positive {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return Err(CliError::Validation(format!("{k} = {x} must be finite and > 0")));
                }
            }
        }
        for (k, v) in [("s", self.s), ("u", self.u)] {
            if let Some(x) = v {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(CliError::Validation(format!("{k} = {x} must be finite and >= 0")));
                }
            }
        }
        if let Some(x) = self.mu {
            if !x.is_finite() {
                return Err(CliError::Validation(format!("mu = {x} must be finite")));
            }
        }
        for (k, v) in [("n", self.n), ("n_eig", self.n_eig), ("outer", self.outer), ("threads", self.threads)] {
            if v == Some(0) {
                return Err(CliError::Validation(format!("{k} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Output path: `--out`, else `<$EDWARDS_OUT_DIR>/<command>.<ext>`, else stdout.
    pub fn output_path(&self, command: &str, format: Format) -> Option<PathBuf> {
        if let Some(p) = &self.out {
            return Some(p.clone());
        }
        let dir = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty())?;
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        Some(Path::new(&dir).join(format!("{command}.{ext}")))
    }
}

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EDWARDS_OUT_DIR";
