//! Symbols, spreading codes, channel parameters and the received chip-rate
//! signal of a synchronous base-band CDMA link.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{dim, domain, Result};

/// The M users' length-N ±1 chip codes, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpreadingCodeSet {
    users: usize,
    length: usize,
    chips: Vec<i8>,
}

impl SpreadingCodeSet {
    /// Builds a code set from explicit rows.
    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Self> {
        let users = rows.len();
        if users == 0 {
            return Err(dim("code set needs at least one user"));
        }
        let length = rows[0].len();
        if length == 0 {
            return Err(dim("code length must be at least one chip"));
        }
        let mut chips = Vec::with_capacity(users * length);
        for (m, row) in rows.into_iter().enumerate() {
            if row.len() != length {
                return Err(dim(format!(
                    "code {m} has length {}, expected {length}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().find(|c| **c != 1 && **c != -1) {
                return Err(domain(format!("code {m} contains chip {c}, expected ±1")));
            }
            chips.extend(row);
        }
        Ok(Self {
            users,
            length,
            chips,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Code length N, also the processing gain.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Chips of user `m` (zero-based).
    pub fn code(&self, m: usize) -> &[i8] {
        &self.chips[m * self.length..(m + 1) * self.length]
    }

    pub fn chip(&self, m: usize, n: usize) -> i8 {
        self.chips[m * self.length + n]
    }
}

/// One symbol per user, each ±1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolFrame {
    bits: Vec<i8>,
}

impl SymbolFrame {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|b| **b != 1 && **b != -1) {
            return Err(domain(format!("symbol {b} is not ±1")));
        }
        Ok(Self { bits })
    }

    /// Draws M equiprobable ±1 symbols.
    pub fn random<R: Rng + ?Sized>(users: usize, rng: &mut R) -> Self {
        let bits = (0..users)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self { bits }
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of positions where `self` and `other` disagree.
    pub fn errors_against(&self, other: &SymbolFrame) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// One of the four π/2-wide quarters of [0, 2π), numbered 1 to 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuarterIndex(u8);

impl QuarterIndex {
    pub const ALL: [QuarterIndex; 4] = [
        QuarterIndex(1),
        QuarterIndex(2),
        QuarterIndex(3),
        QuarterIndex(4),
    ];

    pub fn new(i: u8) -> Result<Self> {
        if (1..=4).contains(&i) {
            Ok(Self(i))
        } else {
            Err(domain(format!("quarter index {i} outside 1..=4")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

/// Reduces `theta` modulo 2π into [0, 2π).
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(domain(format!("angle {theta} is not finite")));
    }
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    Ok(if r >= TAU { 0.0 } else { r })
}

/// Quarter containing `phase`, using half-open intervals [(i−1)π/2, iπ/2).
pub fn quarter_of(phase: f64) -> Result<QuarterIndex> {
    if !(0.0..TAU).contains(&phase) {
        return Err(domain(format!("phase {phase} outside [0, 2π)")));
    }
    let i = ((phase / FRAC_PI_2).floor() as u8).min(3) + 1;
    Ok(QuarterIndex(i))
}

/// Midpoint (2i−1)π/4 of quarter i, the phase estimate used when only the
/// quarter is known.
pub fn quarter_midpoint(i: QuarterIndex) -> f64 {
    (2.0 * f64::from(i.0) - 1.0) * FRAC_PI_4
}

/// Per-user phases, amplitude gains and quarter side information for one
/// symbol interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    phases: Vec<f64>,
    gains: Vec<f64>,
    quarters: Vec<QuarterIndex>,
}

impl ChannelState {
    /// Validates phases in [0, 2π) and gains in (0, 1]; quarters are derived.
    pub fn new(phases: Vec<f64>, gains: Vec<f64>) -> Result<Self> {
        if phases.len() != gains.len() {
            return Err(dim(format!(
                "{} phases but {} gains",
                phases.len(),
                gains.len()
            )));
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(domain(format!("gain {g} outside (0, 1]")));
        }
        let quarters = phases
            .iter()
            .map(|p| quarter_of(*p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            phases,
            gains,
            quarters,
        })
    }

    /// Unit gains for every user.
    pub fn balanced(phases: Vec<f64>) -> Result<Self> {
        let gains = vec![1.0; phases.len()];
        Self::new(phases, gains)
    }

    pub fn users(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn quarter_info(&self) -> &[QuarterIndex] {
        &self.quarters
    }

    /// Replaces one user's phase, keeping the quarter information consistent.
    pub fn with_phase(mut self, m: usize, phase: f64) -> Result<Self> {
        if m >= self.phases.len() {
            return Err(dim(format!("user {m} out of range")));
        }
        self.quarters[m] = quarter_of(phase)?;
        self.phases[m] = phase;
        Ok(self)
    }
}

/// N complex chip-rate samples for one symbol interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    samples: Vec<Complex64>,
}

impl ReceivedFrame {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(dim("frame must hold at least one sample"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Circularly-symmetric complex AWGN with total variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    /// Noise for a per-user chip SNR in dB with unit signal power.
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(domain(format!("SNR {snr_db} dB is not finite")));
        }
        Self::from_variance(10f64.powf(-snr_db / 10.0))
    }

    pub fn from_variance(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(domain(format!("noise variance {sigma2} must be positive")));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.sigma2.log10()
    }

    /// One noise sample, σ²/2 per real dimension.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let s = (self.sigma2 / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    }
}

/// Draws M independent length-N codes with equiprobable ±1 chips.
pub fn generate_codes<R: Rng + ?Sized>(
    users: usize,
    length: usize,
    rng: &mut R,
) -> Result<SpreadingCodeSet> {
    if users == 0 || length == 0 {
        return Err(dim(format!(
            "code set needs M ≥ 1 and N ≥ 1, got M={users}, N={length}"
        )));
    }
    let chips = (0..users * length)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    Ok(SpreadingCodeSet {
        users,
        length,
        chips,
    })
}

/// r(n) = Σ_m β_m α_m e^{jφ_m} p_m(n) + v(n).
pub fn synthesize_frame<R: Rng + ?Sized>(
    bits: &SymbolFrame,
    channel: &ChannelState,
    codes: &SpreadingCodeSet,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ReceivedFrame> {
    let users = codes.users();
    if bits.len() != users || channel.users() != users {
        return Err(dim(format!(
            "{} bits and {} channels for {users} codes",
            bits.len(),
            channel.users()
        )));
    }
    let amplitudes: Vec<Complex64> = (0..users)
        .map(|m| {
            Complex64::from_polar(channel.gains[m], channel.phases[m]) * f64::from(bits.bits[m])
        })
        .collect();
    let samples = (0..codes.length())
        .map(|n| {
            let signal: Complex64 = amplitudes
                .iter()
                .enumerate()
                .map(|(m, a)| a * f64::from(codes.chip(m, n)))
                .sum();
            signal + noise.sample(rng)
        })
        .collect();
    Ok(ReceivedFrame { samples })
}

/// Phase drawn uniformly from [0, 2π).
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let p = rng.random::<f64>() * TAU;
    if p >= TAU {
        0.0
    } else {
        p
    }
}
