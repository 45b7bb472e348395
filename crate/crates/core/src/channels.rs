//! Per-symbol channel trajectories for balanced, unbalanced and
//! time-varying Rayleigh fading scenarios.
//!
//! Channels are constant over one symbol and may change between symbols.
//! The detectors model a single complex coefficient per user, so the
//! three-tap fading channel is reduced to the sum of the taps that share
//! the strongest tap's chip alignment. Taps at other integer-chip delays
//! see a shifted code, whose correlation with the user's own code has zero
//! mean for random codes, and do not enter the composite coefficient.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{config, Result};
use crate::signal_model::{normalize_angle, random_phase, ChannelState};

/// Number of sinusoids summed per fading tap.
pub const OSCILLATORS_PER_TAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Balanced,
    Unbalanced,
    RayleighFading,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Balanced => "balanced",
            ScenarioKind::Unbalanced => "unbalanced",
            ScenarioKind::RayleighFading => "fading",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "unbalanced" => Ok(Self::Unbalanced),
            "fading" | "rayleigh" => Ok(Self::RayleighFading),
            other => Err(config(format!(
                "unknown scenario '{other}', expected balanced|unbalanced|fading"
            ))),
        }
    }
}

/// Scenario parameters. Fields not used by `kind` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Amplitude interval for unbalanced gains.
    pub gain_range: (f64, f64),
    /// Maximum Doppler shift in Hz.
    pub doppler_hz: f64,
    /// Tap delays in seconds, strictly increasing.
    pub tap_delays_s: Vec<f64>,
    /// Tap power gains in dB.
    pub tap_gains_db: Vec<f64>,
    pub chip_rate_hz: f64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            gain_range: (0.0, 0.3),
            doppler_hz: 40.0,
            tap_delays_s: vec![2e-6, 2.5e-6, 3e-6],
            tap_gains_db: vec![-5.0, -3.0, -10.0],
            chip_rate_hz: 1e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.gain_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0)
            || (self.kind == ScenarioKind::Unbalanced && hi <= 0.0)
        {
            return Err(config(format!(
                "gain range [{lo}, {hi}] must lie in [0, 1] with a positive upper end"
            )));
        }
        if self.kind != ScenarioKind::RayleighFading {
            return Ok(());
        }
        if !(self.doppler_hz > 0.0 && self.doppler_hz.is_finite()) {
            return Err(config(format!(
                "Doppler shift {} Hz must be positive",
                self.doppler_hz
            )));
        }
        if !(self.chip_rate_hz > 0.0 && self.chip_rate_hz.is_finite()) {
            return Err(config(format!(
                "chip rate {} Hz must be positive",
                self.chip_rate_hz
            )));
        }
        if self.tap_delays_s.is_empty() || self.tap_delays_s.len() != self.tap_gains_db.len() {
            return Err(config(format!(
                "{} tap delays and {} tap gains",
                self.tap_delays_s.len(),
                self.tap_gains_db.len()
            )));
        }
        if self.tap_delays_s.windows(2).any(|w| w[0] >= w[1])
            || self
                .tap_delays_s
                .iter()
                .any(|d| !(d.is_finite() && *d >= 0.0))
        {
            return Err(config(
                "tap delays must be non-negative and strictly increasing",
            ));
        }
        if self.tap_gains_db.iter().any(|g| !g.is_finite()) {
            return Err(config("tap gains must be finite"));
        }
        Ok(())
    }

    /// Duration of one symbol of `code_length` chips.
    pub fn symbol_duration(&self, code_length: usize) -> f64 {
        code_length as f64 / self.chip_rate_hz
    }

    /// Linear amplitude of each tap.
    pub fn tap_amplitudes(&self) -> Vec<f64> {
        self.tap_gains_db
            .iter()
            .map(|db| 10f64.powf(db / 20.0))
            .collect()
    }

    /// Taps that share the chip alignment of the strongest tap. Delays are
    /// rounded to the nearest whole chip.
    pub fn aligned_taps(&self) -> Vec<bool> {
        let chips: Vec<i64> = self
            .tap_delays_s
            .iter()
            .map(|d| (d * self.chip_rate_hz).round() as i64)
            .collect();
        let dominant = self
            .tap_gains_db
            .iter()
            .enumerate()
            .fold(0, |best, (i, g)| {
                if *g > self.tap_gains_db[best] {
                    i
                } else {
                    best
                }
            });
        chips.iter().map(|c| *c == chips[dominant]).collect()
    }
}

/// Sum-of-sinusoids Rayleigh generator for one tap:
/// g(t) = K^{-1/2} Σ_k exp(j(2π f_D cos θ_k t + ψ_k)),
/// with arrival angles θ_k and phases ψ_k uniform on [0, 2π). Its ensemble
/// autocorrelation is J₀(2π f_D τ) and E|g|² = 1.
#[derive(Debug, Clone, PartialEq)]
struct SumOfSinusoids {
    /// Angular Doppler frequency of each oscillator, rad/s.
    omegas: Vec<f64>,
    phases: Vec<f64>,
}

impl SumOfSinusoids {
    fn new<R: Rng + ?Sized>(doppler_hz: f64, rng: &mut R) -> Self {
        let (omegas, phases) = (0..OSCILLATORS_PER_TAP)
            .map(|_| {
                let arrival = rng.random::<f64>() * TAU;
                (TAU * doppler_hz * arrival.cos(), rng.random::<f64>() * TAU)
            })
            .unzip();
        Self { omegas, phases }
    }

    fn at(&self, t: f64) -> Complex64 {
        let sum: Complex64 = self
            .omegas
            .iter()
            .zip(&self.phases)
            .map(|(w, p)| Complex64::from_polar(1.0, w * t + p))
            .sum();
        sum / (self.omegas.len() as f64).sqrt()
    }
}

/// Per-user, per-tap fading generators and their most recent coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingProcessState {
    generators: Vec<Vec<SumOfSinusoids>>,
    amplitudes: Vec<f64>,
    coefficients: Vec<Vec<Complex64>>,
}

impl FadingProcessState {
    /// Seeds independent generators for every user and tap.
    pub fn new<R: Rng + ?Sized>(spec: &ScenarioSpec, users: usize, rng: &mut R) -> Self {
        let taps = spec.tap_delays_s.len();
        let generators: Vec<Vec<SumOfSinusoids>> = (0..users)
            .map(|_| {
                (0..taps)
                    .map(|_| SumOfSinusoids::new(spec.doppler_hz, rng))
                    .collect()
            })
            .collect();
        Self {
            coefficients: vec![vec![Complex64::new(0.0, 0.0); taps]; users],
            generators,
            amplitudes: spec.tap_amplitudes(),
        }
    }

    /// Evaluates every tap at time `t` seconds.
    pub fn advance(&mut self, t: f64) {
        for (gens, coeffs) in self.generators.iter().zip(self.coefficients.iter_mut()) {
            for ((g, c), a) in gens.iter().zip(coeffs.iter_mut()).zip(&self.amplitudes) {
                *c = g.at(t) * a;
            }
        }
    }

    /// Tap coefficients of user `m` at the last evaluated time, scaled by
    /// the tap amplitudes.
    pub fn tap_coefficients(&self, m: usize) -> &[Complex64] {
        &self.coefficients[m]
    }
}

/// Channel trajectory for one run of consecutive symbols.
///
/// Unbalanced gains are drawn once when the process is created; phases are
/// redrawn every symbol. Fading taps evolve continuously in time with
/// symbol `k` sampled at `k · N / chip_rate`.
#[derive(Debug, Clone)]
pub struct ChannelProcess {
    spec: ScenarioSpec,
    users: usize,
    symbol_duration: f64,
    fixed_gains: Option<Vec<f64>>,
    fading: Option<FadingProcessState>,
    aligned: Vec<bool>,
    clamp_events: u64,
}

impl ChannelProcess {
    pub fn new<R: Rng + ?Sized>(
        spec: &ScenarioSpec,
        users: usize,
        code_length: usize,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        if users == 0 || code_length == 0 {
            return Err(config("channel process needs M ≥ 1 and N ≥ 1"));
        }
        let fixed_gains = match spec.kind {
            ScenarioKind::Balanced => Some(vec![1.0; users]),
            ScenarioKind::Unbalanced => Some(
                (0..users)
                    .map(|_| draw_gain(spec.gain_range, rng))
                    .collect(),
            ),
            ScenarioKind::RayleighFading => None,
        };
        let fading = (spec.kind == ScenarioKind::RayleighFading)
            .then(|| FadingProcessState::new(spec, users, rng));
        Ok(Self {
            symbol_duration: spec.symbol_duration(code_length),
            aligned: spec.aligned_taps(),
            spec: spec.clone(),
            users,
            fixed_gains,
            fading,
            clamp_events: 0,
        })
    }

    /// Channel for symbol `symbol_index` of this run.
    pub fn next_channel<R: Rng + ?Sized>(
        &mut self,
        symbol_index: u64,
        rng: &mut R,
    ) -> Result<ChannelState> {
        match (&self.fixed_gains, &mut self.fading) {
            (Some(gains), _) => {
                let phases = (0..self.users).map(|_| random_phase(rng)).collect();
                ChannelState::new(phases, gains.clone())
            }
            (None, Some(fading)) => {
                fading.advance(symbol_index as f64 * self.symbol_duration);
                let mut phases = Vec::with_capacity(self.users);
                let mut gains = Vec::with_capacity(self.users);
                for m in 0..self.users {
                    let h: Complex64 = fading
                        .tap_coefficients(m)
                        .iter()
                        .zip(&self.aligned)
                        .filter(|(_, a)| **a)
                        .map(|(c, _)| *c)
                        .sum();
                    let magnitude = h.norm();
                    if magnitude > 1.0 {
                        self.clamp_events += 1;
                    }
                    phases.push(normalize_angle(h.arg())?);
                    gains.push(magnitude.clamp(f64::MIN_POSITIVE, 1.0));
                }
                ChannelState::new(phases, gains)
            }
            (None, None) => unreachable!("process holds either fixed gains or fading state"),
        }
    }

    pub fn fading_state(&self) -> Option<&FadingProcessState> {
        self.fading.as_ref()
    }

    /// Number of composite fading magnitudes clamped to 1 so far.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }
}

fn draw_gain<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    loop {
        let g = lo + (hi - lo) * rng.random::<f64>();
        if g > 0.0 {
            return g;
        }
    }
}
