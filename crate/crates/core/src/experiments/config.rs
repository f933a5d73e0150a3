//! Experiment configuration and its `key=value` file form.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::PhasePolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    SweepBeta,
    Scaling,
    Enhancement,
    SatSweep,
    BacktrackSweep,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::SweepBeta => "sweep-beta",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Enhancement => "enhancement",
            ExperimentKind::SatSweep => "sat-sweep",
            ExperimentKind::BacktrackSweep => "backtrack-sweep",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sweep-beta" => Ok(ExperimentKind::SweepBeta),
            "scaling" => Ok(ExperimentKind::Scaling),
            "enhancement" => Ok(ExperimentKind::Enhancement),
            "sat-sweep" => Ok(ExperimentKind::SatSweep),
            "backtrack-sweep" | "backtrack" => Ok(ExperimentKind::BacktrackSweep),
            other => Err(Error::Config(format!("unknown experiment kind {other:?}"))),
        }
    }
}

/// Solution level as a function of the item count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelRule {
    /// `L = N / 2`, N even.
    Half,
    Fixed(usize),
}

impl FromStr for LevelRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "half" | "N/2" => Ok(LevelRule::Half),
            v => v
                .parse()
                .map(LevelRule::Fixed)
                .map_err(|_| Error::Config(format!("level rule must be `half` or an integer, got {v:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Item counts N, or variable counts n for 3-SAT.
    pub sizes: Vec<usize>,
    pub level: LevelRule,
    pub betas: Vec<f64>,
    /// Clause-to-variable ratios for 3-SAT.
    pub ratios: Vec<f64>,
    pub b: f64,
    /// Instances per point; `None` picks 100 for random phases and 1000 otherwise.
    pub instances: Option<usize>,
    pub tries: usize,
    pub seed: u64,
    pub policy: PhasePolicy<f64>,
    /// Defaults to 2, or 3 for 3-SAT.
    pub start_level: Option<usize>,
    pub solubility_filter: bool,
    pub skip_infeasible: bool,
    pub out: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let count = ((to - from) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| from + k as f64 * step).collect()
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let (sizes, betas) = match kind {
            ExperimentKind::SweepBeta => (vec![10], grid(0.5, 3.5, 0.25)),
            ExperimentKind::Scaling | ExperimentKind::Enhancement => {
                (vec![12, 14, 16, 18, 20], vec![1.0, 2.0, 3.0, 4.0])
            }
            ExperimentKind::BacktrackSweep => (vec![10], grid(0.25, 3.5, 0.25)),
            ExperimentKind::SatSweep => ((5..=9).collect(), vec![]),
        };
        ExperimentConfig {
            kind,
            sizes,
            level: LevelRule::Half,
            betas,
            ratios: vec![2.0, 4.0, 6.0, 8.0],
            b: 2.0,
            instances: None,
            tries: 10,
            seed: 1,
            policy: PhasePolicy::Inversion,
            start_level: None,
            solubility_filter: true,
            skip_infeasible: false,
            out: None,
            raw: None,
            svg: None,
        }
    }

    pub fn instances(&self) -> usize {
        self.instances
            .unwrap_or(if self.policy.is_random() { 100 } else { 1000 })
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("bad value {value:?} for {what}"));
        match key.trim() {
            "kind" => self.kind = value.parse()?,
            "n" | "N" | "sizes" => self.sizes = parse_list(value)?.into_iter().map(|v| v as usize).collect(),
            "l" | "L" | "level" => self.level = value.parse()?,
            "beta" | "betas" => self.betas = parse_list(value)?,
            "ratio" | "ratios" => self.ratios = parse_list(value)?,
            "b" => self.b = value.parse().map_err(|_| bad("b"))?,
            "instances" => self.instances = Some(value.parse().map_err(|_| bad("instances"))?),
            "tries" => self.tries = value.parse().map_err(|_| bad("tries"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "policy" => self.policy = value.parse()?,
            "start" | "start_level" => self.start_level = Some(value.parse().map_err(|_| bad("start"))?),
            "filter" | "solubility_filter" => self.solubility_filter = value.parse().map_err(|_| bad("filter"))?,
            "skip_infeasible" => self.skip_infeasible = value.parse().map_err(|_| bad("skip_infeasible"))?,
            "out" => self.out = Some(value.into()),
            "raw" => self.raw = Some(value.into()),
            "svg" => self.svg = Some(value.into()),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file: one setting per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }
}

/// Comma-separated values, each either a number or `from:to:step`.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let nums: Vec<f64> = part
            .split(':')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad list entry {part:?}")))?;
        match nums[..] {
            [v] => out.push(v),
            [from, to, step] if step > 0.0 && to >= from => out.extend(grid(from, to, step)),
            _ => return Err(Error::Config(format!("bad range {part:?}, expected from:to:step"))),
        }
    }
    Ok(out)
}
