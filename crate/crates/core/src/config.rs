//! Scheduler configuration and its `key = value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::priority::{min_priority_gap, Priority};

/// How the active set is ordered for prioritized selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Deterministic top-C extraction from a binary max-heap.
    MaxHeap,
    /// Priority-proportional sampling from a sum-tree.
    SumTree,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MaxHeap => "max_heap",
            Strategy::SumTree => "sum_tree",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "max_heap" | "maxheap" | "heap" => Ok(Strategy::MaxHeap),
            "sum_tree" | "sumtree" => Ok(Strategy::SumTree),
            _ => Err(format!("unknown strategy {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerConfig {
    /// Rollouts per problem (N).
    pub group_size: u32,
    /// Training problems per step (C).
    pub batch_size: u32,
    /// Weight of the previous estimate in the success-rate EMA.
    pub ema_alpha: f64,
    /// Priority given to problems that have never been evaluated.
    pub init_priority: Priority,
    /// Added to the priority when the smoothed success rate is at least 1/2.
    pub bias_epsilon: f64,
    /// Probability that a whole training batch is drawn uniformly.
    pub exploration_rate: f64,
    /// Steps between retest batches.
    pub retest_period: u64,
    pub retest_solved_count: u32,
    pub retest_unsolved_count: u32,
    /// Band for pool classification: `p ≥ 1 − tol` is solved, `p ≤ tol`
    /// unsolved.
    pub tolerance: f64,
    pub strategy: Strategy,
    /// Sum-tree leaves hold `ω^exponent`; 1 is proportional, 0 uniform.
    pub priority_exponent: f64,
    pub rng_seed: u64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            group_size: 8,
            batch_size: 4,
            ema_alpha: 0.8,
            init_priority: Priority::Finite(0.2),
            bias_epsilon: 1e-4,
            exploration_rate: 0.125,
            retest_period: 10,
            retest_solved_count: 1,
            retest_unsolved_count: 3,
            tolerance: 0.0,
            strategy: Strategy::MaxHeap,
            priority_exponent: 1.0,
            rng_seed: 0,
        }
    }
}

/// One violated configuration invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    GroupSizeZero,
    BatchSizeZero,
    AlphaOutOfRange(f64),
    BiasNegative(f64),
    BiasTooLarge { bias: f64, gap: f64 },
    ExplorationOutOfRange(f64),
    RetestPeriodZero,
    ToleranceOutOfRange(f64),
    SumTreeInfiniteInit,
    SumTreeZeroInit,
    ExponentOutOfRange(f64),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::GroupSizeZero => f.write_str("group size must be positive"),
            ConfigError::BatchSizeZero => f.write_str("batch size must be positive"),
            ConfigError::AlphaOutOfRange(a) if *a >= 1.0 => {
                write!(f, "alpha must be < 1 (got {a})")
            }
            ConfigError::AlphaOutOfRange(a) => write!(f, "alpha must be in [0, 1) (got {a})"),
            ConfigError::BiasNegative(b) => {
                write!(f, "bias epsilon must be finite and non-negative (got {b})")
            }
            ConfigError::BiasTooLarge { bias, gap } => write!(
                f,
                "bias epsilon {bias} must be smaller than the priority gap {gap} of the group size"
            ),
            ConfigError::ExplorationOutOfRange(r) => {
                write!(f, "exploration rate must be in [0, 1] (got {r})")
            }
            ConfigError::RetestPeriodZero => f.write_str("retest period must be positive"),
            ConfigError::ToleranceOutOfRange(t) => {
                write!(f, "tolerance must be in [0, 0.5) (got {t})")
            }
            ConfigError::SumTreeInfiniteInit => f.write_str("sum-tree requires finite init"),
            ConfigError::SumTreeZeroInit => {
                f.write_str("sum-tree requires a strictly positive init priority")
            }
            ConfigError::ExponentOutOfRange(b) => {
                write!(
                    f,
                    "priority exponent must be finite and non-negative (got {b})"
                )
            }
        }
    }
}

impl SchedulerConfig {
    /// Every violated invariant, or `Ok` when there are none.
    pub fn validate(&self) -> std::result::Result<(), Vec<ConfigError>> {
        let mut errs = Vec::new();
        if self.group_size == 0 {
            errs.push(ConfigError::GroupSizeZero);
        }
        if self.batch_size == 0 {
            errs.push(ConfigError::BatchSizeZero);
        }
        if !(0.0..1.0).contains(&self.ema_alpha) {
            errs.push(ConfigError::AlphaOutOfRange(self.ema_alpha));
        }
        if !(self.bias_epsilon.is_finite() && self.bias_epsilon >= 0.0) {
            errs.push(ConfigError::BiasNegative(self.bias_epsilon));
        } else if self.group_size > 0 {
            if let Some(gap) = min_priority_gap(self.group_size) {
                if self.bias_epsilon >= gap {
                    errs.push(ConfigError::BiasTooLarge {
                        bias: self.bias_epsilon,
                        gap,
                    });
                }
            }
        }
        if !(0.0..=1.0).contains(&self.exploration_rate) {
            errs.push(ConfigError::ExplorationOutOfRange(self.exploration_rate));
        }
        if self.retest_period == 0 {
            errs.push(ConfigError::RetestPeriodZero);
        }
        if !(0.0..0.5).contains(&self.tolerance) {
            errs.push(ConfigError::ToleranceOutOfRange(self.tolerance));
        }
        if self.strategy == Strategy::SumTree {
            match self.init_priority {
                Priority::Infinite => errs.push(ConfigError::SumTreeInfiniteInit),
                Priority::Finite(v) if v <= 0.0 => errs.push(ConfigError::SumTreeZeroInit),
                Priority::Finite(_) => {}
            }
        }
        if !(self.priority_exponent.is_finite() && self.priority_exponent >= 0.0) {
            errs.push(ConfigError::ExponentOutOfRange(self.priority_exponent));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Parse a `key = value` document on top of the defaults.
    ///
    /// Blank lines and `#` comments are ignored. Unknown keys are an error.
    /// The result is not validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SchedulerConfig::default();
        for (line, key, value) in key_values(text)? {
            cfg.set(key, value)
                .map_err(|msg| Error::Parse { line, msg })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Set one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "group_size" => self.group_size = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "ema_alpha" => self.ema_alpha = parse_value(key, value)?,
            "init_priority" => self.init_priority = value.parse()?,
            "bias_epsilon" => self.bias_epsilon = parse_value(key, value)?,
            "exploration_rate" => self.exploration_rate = parse_value(key, value)?,
            "retest_period" => self.retest_period = parse_value(key, value)?,
            "retest_solved_count" => self.retest_solved_count = parse_value(key, value)?,
            "retest_unsolved_count" => self.retest_unsolved_count = parse_value(key, value)?,
            "tolerance" => self.tolerance = parse_value(key, value)?,
            "strategy" => self.strategy = value.parse()?,
            "priority_exponent" => self.priority_exponent = parse_value(key, value)?,
            "rng_seed" => self.rng_seed = parse_value(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Serialise as a `key = value` document that [`SchedulerConfig::parse`]
    /// reads back exactly.
    pub fn to_text(&self) -> String {
        format!(
            "group_size = {}\n\
             batch_size = {}\n\
             ema_alpha = {:?}\n\
             init_priority = {}\n\
             bias_epsilon = {:?}\n\
             exploration_rate = {:?}\n\
             retest_period = {}\n\
             retest_solved_count = {}\n\
             retest_unsolved_count = {}\n\
             tolerance = {:?}\n\
             strategy = {}\n\
             priority_exponent = {:?}\n\
             rng_seed = {}\n",
            self.group_size,
            self.batch_size,
            self.ema_alpha,
            self.init_priority,
            self.bias_epsilon,
            self.exploration_rate,
            self.retest_period,
            self.retest_solved_count,
            self.retest_unsolved_count,
            self.tolerance,
            self.strategy,
            self.priority_exponent,
            self.rng_seed,
        )
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

/// Split a `key = value` document into `(line number, key, value)` triples.
pub(crate) fn key_values(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        out.push((i + 1, key.trim(), value.trim()));
    }
    Ok(out)
}
