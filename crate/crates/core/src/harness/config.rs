//! Experiment configuration: flat `key = value` files and CLI overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::placement::Placement;
use crate::params::DEFAULT_K;
use crate::sinr::PhysicalParams;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    /// Randomized 4Δ coloring followed by color reduction.
    Sync,
    /// Two-level MIS coloring with random wake-up times.
    Async,
    /// Randomized 4Δ coloring only.
    Rand4Delta,
    /// Color reduction from a random valid 4Δ coloring.
    Reduction,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Sync => "sync",
            Algo::Async => "async",
            Algo::Rand4Delta => "rand4delta",
            Algo::Reduction => "reduction",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sync" => Ok(Algo::Sync),
            "async" => Ok(Algo::Async),
            "rand4delta" | "rand4delta-only" => Ok(Algo::Rand4Delta),
            "reduction" | "color-reduction-only" => Ok(Algo::Reduction),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LambdaMode {
    /// Calibrate λ per topology by simulation.
    Auto,
    Value(f64),
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaMode::Auto => f.write_str("auto"),
            LambdaMode::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(LambdaMode::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(LambdaMode::Value(v)),
            _ => Err(Error::Config(format!("lambda must be 'auto' or a positive number, got '{s}'"))),
        }
    }
}

/// Parses `0..5`, `0..=4`, `3` and comma-separated mixes of them.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seeds '{s}'"));
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..=") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            seeds.extend(a..=b);
        } else if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(seeds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub placement: Placement,
    pub n: usize,
    /// Side of the square area. When unset the square is sized so that Δ
    /// lands on `target_delta`.
    pub area: Option<f64>,
    pub target_delta: usize,
    /// Reads node positions from this file instead of generating them.
    pub topology: Option<PathBuf>,
    pub params: PhysicalParams,
    pub c: f64,
    pub lambda: LambdaMode,
    pub k: u64,
    pub algo: Algo,
    pub seeds: Vec<u64>,
    /// Slot cap per run; derived from the constants when unset.
    pub max_slots: Option<u64>,
    pub out: Option<PathBuf>,
    pub trace: bool,
    pub deterministic: bool,
    /// Asynchronous wake-up offsets are uniform in `[0, wake_spread · κ2]`.
    pub wake_spread: u64,
    pub calibration_trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            placement: Placement::UniformSquare,
            n: 200,
            area: None,
            target_delta: 16,
            topology: None,
            params: PhysicalParams::default(),
            c: 2.0,
            lambda: LambdaMode::Auto,
            k: DEFAULT_K,
            algo: Algo::Sync,
            seeds: vec![0],
            max_slots: None,
            out: None,
            trace: false,
            deterministic: false,
            wake_spread: 10,
            calibration_trials: 200,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

impl ExperimentConfig {
    /// Sets one option. Keys match the CLI flags without dashes; `_` and `-`
    /// are interchangeable.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "placement" => self.placement = value.parse()?,
            "n" => self.n = num(&key, value)?,
            "area" => self.area = Some(num(&key, value)?),
            "target-delta" => self.target_delta = num(&key, value)?,
            "topology" => self.topology = Some(PathBuf::from(value)),
            "alpha" => self.params.alpha = num(&key, value)?,
            "beta" => self.params.beta = num(&key, value)?,
            "noise" => self.params.noise = num(&key, value)?,
            "power" => self.params.power = num(&key, value)?,
            "epsilon" => self.params.epsilon = num(&key, value)?,
            "rb" | "r-b" => self.params.r_b = num(&key, value)?,
            "c" => self.c = num(&key, value)?,
            "lambda" => self.lambda = value.parse()?,
            "k" => self.k = num(&key, value)?,
            "algo" => self.algo = value.parse()?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "max-slots" => self.max_slots = Some(num(&key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "trace" => self.trace = flag(&key, value)?,
            "deterministic" => self.deterministic = flag(&key, value)?,
            "wake-spread" => self.wake_spread = num(&key, value)?,
            "calibration-trials" => self.calibration_trials = num(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`. Blank
    /// lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: idx + 1, msg: format!("expected key = value, got '{line}'") })?;
            self.apply(key, value).map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        }
        Ok(())
    }

    /// Defaults overlaid with the file at `path`. Relative topology paths
    /// are resolved against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::default();
        config.apply_str(&std::fs::read_to_string(path)?)?;
        if let (Some(t), Some(dir)) = (&config.topology, path.parent()) {
            if t.is_relative() {
                config.topology = Some(dir.join(t));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if let Some(a) = self.area {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("area must be positive, got {a}")));
            }
        }
        if let Some(t) = &self.topology {
            if !t.is_file() {
                return Err(Error::Config(format!("topology file {} does not exist", t.display())));
            }
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be >= 1, got {}", self.c)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.max_slots == Some(0) {
            return Err(Error::Config("max-slots must be >= 1".into()));
        }
        if self.lambda == LambdaMode::Auto && self.calibration_trials == 0 {
            return Err(Error::Config("calibration-trials must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("1..=3, 7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_seeds("42").unwrap(), vec![42]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn file_overrides_defaults() {
        let mut c = ExperimentConfig::default();
        c.apply_str("# sweep\nn = 50\nalgo=async\nmax_slots = 1000\nlambda = 1.25\nseeds = 0..2\ndeterministic = true\n")
            .unwrap();
        assert_eq!(c.n, 50);
        assert_eq!(c.algo, Algo::Async);
        assert_eq!(c.max_slots, Some(1000));
        assert_eq!(c.lambda, LambdaMode::Value(1.25));
        assert_eq!(c.seeds, vec![0, 1]);
        assert!(c.deterministic);
        c.validate().unwrap();
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut c = ExperimentConfig::default();
        match c.apply_str("n = 5\n\nbogus = 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(c.apply_str("n 5"), Err(Error::Parse { line: 1, .. })));
        assert!(c.apply("lambda", "-1").is_err());
        assert!(c.apply("algo", "luby").is_err());
    }

    #[test]
    fn validation_rejects_missing_files_and_empty_seeds() {
        let mut c = ExperimentConfig { topology: Some("/nonexistent/topo.txt".into()), ..Default::default() };
        assert!(c.validate().is_err());
        c.topology = None;
        c.seeds.clear();
        assert!(c.validate().is_err());
    }
}
