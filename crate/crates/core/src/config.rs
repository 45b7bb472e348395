//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # Balanced load sweep
//! user_counts = 5, 10, 15
//! code_lengths = 64
//! snr_db = 0
//! stages = 2
//! bank_multipliers = 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1
//! scenario = balanced
//! frames_per_point = 4000
//! seed = 7
//! detectors = conventional, lms-ppic, plms-ppic
//! ```
//!
//! Keys are the [`ExperimentConfig`] field names, lists are comma
//! separated, `#` starts a comment. Unknown or repeated keys are errors.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channels::{ScenarioKind, ScenarioSpec};
use crate::detectors::{StepSizeBank, Variant};
use crate::error::{config, Error, Result};
use crate::signal_model::{normalize_angle, NoiseModel};

/// Step-size multipliers {0.01, 0.05, 0.1, 0.2, …, 1} of the load-sweep
/// experiments, as fractions of 1 − √((M−1)/M).
pub const DEFAULT_BANK_MULTIPLIERS: [f64; 12] =
    [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Step size of the single-recursion receiver as a fraction of the range limit.
pub const DEFAULT_LMS_MULTIPLIER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Conventional,
    ModifiedLmsPpic,
    ModifiedPlmsPpic,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [
        DetectorKind::Conventional,
        DetectorKind::ModifiedLmsPpic,
        DetectorKind::ModifiedPlmsPpic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Conventional => "conventional",
            DetectorKind::ModifiedLmsPpic => "lms-ppic",
            DetectorKind::ModifiedPlmsPpic => "plms-ppic",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            DetectorKind::Conventional => None,
            DetectorKind::ModifiedLmsPpic => Some(Variant::ModifiedLmsPpic),
            DetectorKind::ModifiedPlmsPpic => Some(Variant::ModifiedPlmsPpic),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Self::Conventional),
            "lms-ppic" | "lms" => Ok(Self::ModifiedLmsPpic),
            "plms-ppic" | "plms" => Ok(Self::ModifiedPlmsPpic),
            other => Err(config(format!(
                "unknown detector '{other}', expected conventional|lms-ppic|plms-ppic"
            ))),
        }
    }
}

/// How the PLMS bank is built for each user count.
#[derive(Debug, Clone, PartialEq)]
pub enum BankSpec {
    /// L equal subintervals of the step-size range.
    Uniform(usize),
    /// Explicit fractions of the range limit.
    Multipliers(Vec<f64>),
}

impl BankSpec {
    pub fn build(&self, users: usize) -> Result<StepSizeBank> {
        match self {
            BankSpec::Uniform(l) => StepSizeBank::uniform(users, *l),
            BankSpec::Multipliers(k) => StepSizeBank::from_multipliers(users, k),
        }
    }
}

/// A user whose channel phase is held fixed every symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinnedPhase {
    /// Zero-based user index.
    pub user: usize,
    /// Phase in [0, 2π).
    pub phase: f64,
}

impl FromStr for PinnedPhase {
    type Err = Error;

    /// Parses `<user>:<radians>` with a one-based user number.
    fn from_str(s: &str) -> Result<Self> {
        let (user, phase) = s
            .split_once(':')
            .ok_or_else(|| config(format!("pinned phase '{s}' is not <user>:<radians>")))?;
        let user: usize = parse_scalar("pinned_phase", user)?;
        if user == 0 {
            return Err(config("pinned phase users are numbered from 1"));
        }
        let phase: f64 = parse_scalar("pinned_phase", phase)?;
        Ok(Self {
            user: user - 1,
            phase: normalize_angle(phase).map_err(|e| config(e.to_string()))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub user_counts: Vec<usize>,
    pub code_lengths: Vec<usize>,
    pub snr_db: f64,
    /// Overrides the noise variance derived from `snr_db`.
    pub noise_variance: Option<f64>,
    pub stages: usize,
    pub bank: BankSpec,
    pub lms_multiplier: f64,
    pub scenario: ScenarioSpec,
    pub frames_per_point: usize,
    /// Consecutive symbols that share one channel process (fading
    /// trajectory, unbalanced gains).
    pub symbols_per_run: usize,
    pub seed: u64,
    pub detectors: Vec<DetectorKind>,
    pub pinned_phase: Option<PinnedPhase>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            user_counts: vec![5, 10, 15, 20, 25],
            code_lengths: vec![64, 256],
            snr_db: 0.0,
            noise_variance: None,
            stages: 2,
            bank: BankSpec::Multipliers(DEFAULT_BANK_MULTIPLIERS.to_vec()),
            lms_multiplier: DEFAULT_LMS_MULTIPLIER,
            scenario: ScenarioSpec::new(ScenarioKind::Balanced),
            frames_per_point: 1000,
            symbols_per_run: 100,
            seed: 1,
            detectors: DetectorKind::ALL.to_vec(),
            pinned_phase: None,
        }
    }
}

pub const KEYS: [&str; 19] = [
    "user_counts",
    "code_lengths",
    "snr_db",
    "noise_variance",
    "stages",
    "bank_size",
    "bank_multipliers",
    "lms_multiplier",
    "scenario",
    "gain_range",
    "doppler_hz",
    "tap_delays_s",
    "tap_gains_db",
    "chip_rate_hz",
    "frames_per_point",
    "symbols_per_run",
    "seed",
    "detectors",
    "pinned_phase",
];

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config(format!("{key}: cannot parse '{}'", value.trim())))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(|v| parse_scalar(key, v))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(config(format!("{key}: empty list")));
    }
    Ok(items)
}

impl ExperimentConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "user_counts" => self.user_counts = parse_list(key, value)?,
            "code_lengths" => self.code_lengths = parse_list(key, value)?,
            "snr_db" => self.snr_db = parse_scalar(key, value)?,
            "noise_variance" => self.noise_variance = Some(parse_scalar(key, value)?),
            "stages" => self.stages = parse_scalar(key, value)?,
            "bank_size" => self.bank = BankSpec::Uniform(parse_scalar(key, value)?),
            "bank_multipliers" => self.bank = BankSpec::Multipliers(parse_list(key, value)?),
            "lms_multiplier" => self.lms_multiplier = parse_scalar(key, value)?,
            "scenario" => self.scenario.kind = value.parse::<ScenarioKind>()?,
            "gain_range" => {
                let r: Vec<f64> = parse_list(key, value)?;
                if r.len() != 2 {
                    return Err(config("gain_range takes two values: low, high"));
                }
                self.scenario.gain_range = (r[0], r[1]);
            }
            "doppler_hz" => self.scenario.doppler_hz = parse_scalar(key, value)?,
            "tap_delays_s" => self.scenario.tap_delays_s = parse_list(key, value)?,
            "tap_gains_db" => self.scenario.tap_gains_db = parse_list(key, value)?,
            "chip_rate_hz" => self.scenario.chip_rate_hz = parse_scalar(key, value)?,
            "frames_per_point" => self.frames_per_point = parse_scalar(key, value)?,
            "symbols_per_run" => self.symbols_per_run = parse_scalar(key, value)?,
            "seed" => self.seed = parse_scalar(key, value)?,
            "detectors" => self.detectors = parse_list(key, value)?,
            "pinned_phase" => self.pinned_phase = Some(value.parse()?),
            other => return Err(config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_owned()) {
                return Err(config(format!("line {}: repeated key '{key}'", lineno + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        match self.noise_variance {
            Some(v) => NoiseModel::from_variance(v),
            None => NoiseModel::from_snr_db(self.snr_db),
        }
        .map_err(|e| config(e.to_string()))
    }

    pub fn lms_bank(&self, users: usize) -> Result<StepSizeBank> {
        StepSizeBank::from_multipliers(users, &[self.lms_multiplier])
    }

    /// Checks every invariant that can fail before simulation starts.
    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(config("no detectors selected"));
        }
        let unique: HashSet<_> = self.detectors.iter().collect();
        if unique.len() != self.detectors.len() {
            return Err(config("detector listed twice"));
        }
        if self.user_counts.is_empty() || self.code_lengths.is_empty() {
            return Err(config("user_counts and code_lengths must be non-empty"));
        }
        if self.frames_per_point == 0 {
            return Err(config("frames_per_point must be at least 1"));
        }
        if self.symbols_per_run == 0 {
            return Err(config("symbols_per_run must be at least 1"));
        }
        if self.stages == 0 {
            return Err(config("stages must be at least 1"));
        }
        if let Some(n) = self.code_lengths.iter().find(|n| **n == 0) {
            return Err(config(format!("code length {n} must be positive")));
        }
        let needs_bank = self.detectors.iter().any(|d| d.variant().is_some());
        for &m in &self.user_counts {
            if m == 0 {
                return Err(config("user counts must be positive"));
            }
            if needs_bank {
                self.bank.build(m).map_err(|e| config(e.to_string()))?;
                self.lms_bank(m).map_err(|e| config(e.to_string()))?;
            }
        }
        if let Some(pin) = self.pinned_phase {
            let fewest = self.user_counts.iter().min().copied().unwrap_or(0);
            if pin.user >= fewest {
                return Err(config(format!(
                    "pinned user {} exceeds the smallest user count {fewest}",
                    pin.user + 1
                )));
            }
            if !(0.0..TAU).contains(&pin.phase) {
                return Err(config("pinned phase outside [0, 2π)"));
            }
        }
        self.noise()?;
        self.scenario.validate()
    }
}
