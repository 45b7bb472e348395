//! Conventional quarter-phase detection and multistage partial parallel
//! interference cancelation with an NLMS step-size bank.
//!
//! Stage `s` rewrites the received signal as r(n) = Wᵀ X(n) + v(n) with
//! x_m(n) = α_m^(s−1) p_m(n) and w_m = (α_m / α_m^(s−1)) e^{jφ_m}, so every
//! ideal weight has unit magnitude. A bank of NLMS recursions with step
//! sizes μ_1 < … < μ_L shares one error e(n) per iteration, and the
//! candidate whose weights are closest to unit magnitude,
//! Σ_m ||w_m| − 1|, becomes the common estimate. The final weights give
//! the channel phase up to the unknown sign of α_m / α_m^(s−1), which the
//! receiver's quarter information resolves.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{dim, domain, Error, Result};
use crate::signal_model::{
    normalize_angle, quarter_midpoint, quarter_of, QuarterIndex, ReceivedFrame, SpreadingCodeSet,
    SymbolFrame,
};

/// Upper end of the NLMS step-size range (0, 1 − √((M−1)/M)]. A single
/// user gets the full range (0, 1].
pub fn step_size_limit(users: usize) -> Result<f64> {
    if users == 0 {
        return Err(domain("step-size range needs at least one user"));
    }
    let m = users as f64;
    Ok(1.0 - ((m - 1.0) / m).sqrt())
}

/// Strictly increasing NLMS step sizes inside (0, 1 − √((M−1)/M)].
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeBank {
    mus: Vec<f64>,
}

impl StepSizeBank {
    pub fn new(users: usize, mus: Vec<f64>) -> Result<Self> {
        let limit = step_size_limit(users)?;
        if mus.is_empty() {
            return Err(domain("step-size bank is empty"));
        }
        // relative slack so that multiplier 1 maps onto the limit itself
        let ceiling = limit * (1.0 + 1e-12);
        if let Some(mu) = mus.iter().find(|mu| !(**mu > 0.0 && **mu <= ceiling)) {
            return Err(domain(format!("step size {mu} outside (0, {limit}]")));
        }
        if mus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("step sizes must be strictly increasing"));
        }
        Ok(Self { mus })
    }

    /// A bank that only checks positivity and ordering, for step sizes
    /// outside the stable range.
    pub fn unbounded(mus: Vec<f64>) -> Result<Self> {
        if mus.is_empty() {
            return Err(domain("step-size bank is empty"));
        }
        if mus.iter().any(|mu| !(*mu > 0.0 && mu.is_finite())) {
            return Err(domain("step sizes must be positive and finite"));
        }
        if mus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("step sizes must be strictly increasing"));
        }
        Ok(Self { mus })
    }

    /// μ_l = l · Ψ / L for l = 1…L.
    pub fn uniform(users: usize, subintervals: usize) -> Result<Self> {
        let limit = step_size_limit(users)?;
        if subintervals == 0 {
            return Err(domain("bank needs at least one step size"));
        }
        let l = subintervals as f64;
        Self::new(
            users,
            (1..=subintervals).map(|i| i as f64 * limit / l).collect(),
        )
    }

    /// Step sizes given as fractions of the range limit, e.g.
    /// {0.01, 0.05, 0.1, 0.2, …, 1}.
    pub fn from_multipliers(users: usize, multipliers: &[f64]) -> Result<Self> {
        let limit = step_size_limit(users)?;
        if let Some(k) = multipliers.iter().find(|k| !(**k > 0.0 && **k <= 1.0)) {
            return Err(domain(format!("multiplier {k} outside (0, 1]")));
        }
        Self::new(users, multipliers.iter().map(|k| k * limit).collect())
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }
}

/// Σ_m ||w_m| − 1|, the distance of a weight vector from unit magnitudes.
pub fn magnitude_mismatch(weights: &[Complex64]) -> f64 {
    weights.iter().map(|w| (w.norm() - 1.0).abs()).sum()
}

/// Cancelation weights, one complex value per user.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<Complex64>,
}

impl WeightVector {
    pub fn new(w: Vec<Complex64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite weight".into()));
        }
        Ok(Self { w })
    }

    pub fn zeros(users: usize) -> Self {
        Self {
            w: vec![Complex64::new(0.0, 0.0); users],
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.w
    }

    pub fn mismatch(&self) -> f64 {
        magnitude_mismatch(&self.w)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Which PPIC receiver a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// A single NLMS recursion.
    ModifiedLmsPpic,
    /// A bank of NLMS recursions with per-iteration selection.
    ModifiedPlmsPpic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpicConfig {
    stages: usize,
    bank: StepSizeBank,
    variant: Variant,
}

impl PpicConfig {
    /// The LMS variant requires a single step size; the PLMS variant accepts
    /// any bank, including one of length 1.
    pub fn new(stages: usize, bank: StepSizeBank, variant: Variant) -> Result<Self> {
        if stages == 0 {
            return Err(domain("PPIC needs at least one stage"));
        }
        if variant == Variant::ModifiedLmsPpic && bank.len() != 1 {
            return Err(domain(format!(
                "modified LMS-PPIC uses one step size, bank has {}",
                bank.len()
            )));
        }
        Ok(Self {
            stages,
            bank,
            variant,
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn bank(&self) -> &StepSizeBank {
        &self.bank
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
}

/// Re{Σ_n q(n) e^{−jφ̂} p(n)}.
pub fn correlation_statistic(q: &[Complex64], phase_est: f64, code: &[i8]) -> f64 {
    let sum: Complex64 = q.iter().zip(code).map(|(s, c)| s * f64::from(*c)).sum();
    (sum * Complex64::from_polar(1.0, -phase_est)).re
}

/// Hard decision on the real correlation statistic; a zero statistic
/// decides +1.
pub fn decide_bit(q: &[Complex64], phase_est: f64, code: &[i8]) -> Result<i8> {
    if q.len() != code.len() {
        return Err(dim(format!(
            "{} samples against a code of length {}",
            q.len(),
            code.len()
        )));
    }
    let stat = correlation_statistic(q, phase_est, code);
    if stat.is_nan() {
        return Err(Error::Numeric("correlation statistic is NaN".into()));
    }
    Ok(if stat >= 0.0 { 1 } else { -1 })
}

/// Stage-0 output: bit decisions made with the quarter midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConventionalOutput {
    pub bits: SymbolFrame,
    pub phase_estimates: Vec<f64>,
}

fn check_dims(frame: &ReceivedFrame, codes: &SpreadingCodeSet, users: usize) -> Result<()> {
    if frame.len() != codes.length() {
        return Err(dim(format!(
            "frame of {} samples for codes of length {}",
            frame.len(),
            codes.length()
        )));
    }
    if users != codes.users() {
        return Err(dim(format!(
            "{users} users supplied for {} codes",
            codes.users()
        )));
    }
    Ok(())
}

/// Single-user correlator that only knows each phase's quarter.
pub fn conventional_detect(
    frame: &ReceivedFrame,
    codes: &SpreadingCodeSet,
    quarter_info: &[QuarterIndex],
) -> Result<ConventionalOutput> {
    check_dims(frame, codes, quarter_info.len())?;
    let phase_estimates: Vec<f64> = quarter_info.iter().map(|q| quarter_midpoint(*q)).collect();
    let bits = phase_estimates
        .iter()
        .enumerate()
        .map(|(m, phase)| decide_bit(frame.samples(), *phase, codes.code(m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConventionalOutput {
        bits: SymbolFrame::new(bits)?,
        phase_estimates,
    })
}

/// One iteration of the bank, as seen by an observer.
#[derive(Debug)]
pub struct BankIteration<'a> {
    /// Zero-based iteration index.
    pub n: usize,
    /// W(n−1).
    pub previous: &'a [Complex64],
    /// X(n), entries ±1.
    pub regressor: &'a [f64],
    /// r(n).
    pub sample: Complex64,
    /// Index into the bank of the selected step size.
    pub selected: usize,
    /// W(n).
    pub current: &'a [Complex64],
}

/// Runs the step-size bank over one frame starting from W(0) = 0 and
/// returns W(N).
pub fn nlms_bank_run(
    frame: &ReceivedFrame,
    prev_bits: &SymbolFrame,
    codes: &SpreadingCodeSet,
    bank: &StepSizeBank,
) -> Result<WeightVector> {
    nlms_bank_run_observed(frame, prev_bits, codes, bank, |_| {})
}

/// [`nlms_bank_run`] with a callback after every iteration.
pub fn nlms_bank_run_observed<F>(
    frame: &ReceivedFrame,
    prev_bits: &SymbolFrame,
    codes: &SpreadingCodeSet,
    bank: &StepSizeBank,
    mut observer: F,
) -> Result<WeightVector>
where
    F: FnMut(&BankIteration<'_>),
{
    let users = prev_bits.len();
    check_dims(frame, codes, users)?;
    let mut w = vec![Complex64::new(0.0, 0.0); users];
    let mut previous = w.clone();
    let mut x = vec![0.0; users];
    let mut z = vec![Complex64::new(0.0, 0.0); users];
    for (n, r) in frame.samples().iter().enumerate() {
        for (m, xm) in x.iter_mut().enumerate() {
            *xm = f64::from(prev_bits.bits()[m] * codes.chip(m, n));
        }
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let estimate: Complex64 = w.iter().zip(&x).map(|(wm, xm)| wm * xm).sum();
        let e = r - estimate;
        if !e.is_finite() {
            return Err(Error::Numeric(format!("non-finite error at iteration {n}")));
        }
        // X is real, so X* = X
        for (zm, xm) in z.iter_mut().zip(&x) {
            *zm = e * (xm / energy);
        }
        let mut best = f64::INFINITY;
        let mut selected = 0;
        for (k, mu) in bank.mus().iter().enumerate() {
            let score: f64 = w
                .iter()
                .zip(&z)
                .map(|(wm, zm)| ((wm + zm * mu).norm() - 1.0).abs())
                .sum();
            if score < best {
                best = score;
                selected = k;
            }
        }
        previous.copy_from_slice(&w);
        let mu = bank.mus()[selected];
        for (wm, zm) in w.iter_mut().zip(&z) {
            *wm += zm * mu;
        }
        observer(&BankIteration {
            n,
            previous: &previous,
            regressor: &x,
            sample: *r,
            selected,
            current: &w,
        });
    }
    WeightVector::new(w)
}

/// The three phase candidates angle(w), angle(w)+π, angle(w)−π, each
/// reduced to [0, 2π), in that order.
pub fn phase_candidates(w: Complex64) -> Result<[f64; 3]> {
    if !w.is_finite() {
        return Err(domain("weight is not finite"));
    }
    if w.norm_sqr() == 0.0 {
        return Err(domain("angle of a zero weight is undefined"));
    }
    let theta = w.arg();
    Ok([
        normalize_angle(theta)?,
        normalize_angle(theta + PI)?,
        normalize_angle(theta - PI)?,
    ])
}

/// Channel phase from a final weight and the quarter the phase is known to
/// lie in: the first candidate inside that quarter, otherwise the quarter
/// midpoint.
pub fn estimate_phase(w_final: Complex64, quarter: QuarterIndex) -> Result<f64> {
    for candidate in phase_candidates(w_final)? {
        if quarter_of(candidate)? == quarter {
            return Ok(candidate);
        }
    }
    Ok(quarter_midpoint(quarter))
}

/// q_m(n) = r(n) − Σ_{m'≠m} w_{m'} α_{m'}^(s−1) p_{m'}(n).
pub fn cancel_interference(
    frame: &ReceivedFrame,
    weights: &WeightVector,
    prev_bits: &SymbolFrame,
    codes: &SpreadingCodeSet,
    user: usize,
) -> Result<Vec<Complex64>> {
    let users = prev_bits.len();
    check_dims(frame, codes, users)?;
    if weights.len() != users {
        return Err(dim(format!("{} weights for {users} users", weights.len())));
    }
    if user >= users {
        return Err(dim(format!("user {user} out of range for {users} users")));
    }
    let scaled: Vec<Complex64> = weights
        .as_slice()
        .iter()
        .zip(prev_bits.bits())
        .map(|(w, b)| w * f64::from(*b))
        .collect();
    Ok(frame
        .samples()
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let interference: Complex64 = scaled
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != user)
                .map(|(m, a)| a * f64::from(codes.chip(m, n)))
                .sum();
            r - interference
        })
        .collect())
}

/// Everything one cancelation stage produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StageState {
    /// Stage number s ≥ 1.
    pub stage: usize,
    /// W^s(N).
    pub weights: WeightVector,
    /// α^(s).
    pub bit_estimates: SymbolFrame,
    /// φ̂^s, each in [0, 2π).
    pub phase_estimates: Vec<f64>,
    /// Σ_m ||w_m(N)| − 1|.
    pub mismatch: f64,
}

/// One stage: weight estimation, phase estimation, then cancelation and a
/// fresh decision for every user.
pub fn run_stage(
    frame: &ReceivedFrame,
    codes: &SpreadingCodeSet,
    prev_bits: &SymbolFrame,
    quarter_info: &[QuarterIndex],
    config: &PpicConfig,
    stage: usize,
) -> Result<StageState> {
    if stage == 0 {
        return Err(domain("stage numbering starts at 1"));
    }
    check_dims(frame, codes, quarter_info.len())?;
    let weights = nlms_bank_run(frame, prev_bits, codes, config.bank())?;
    let phase_estimates: Vec<f64> = weights
        .as_slice()
        .iter()
        .zip(quarter_info)
        .map(|(w, q)| estimate_phase(*w, *q).unwrap_or_else(|_| quarter_midpoint(*q)))
        .collect();
    let bits = (0..quarter_info.len())
        .map(|m| {
            let q = cancel_interference(frame, &weights, prev_bits, codes, m)?;
            decide_bit(&q, phase_estimates[m], codes.code(m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StageState {
        stage,
        mismatch: weights.mismatch(),
        weights,
        bit_estimates: SymbolFrame::new(bits)?,
        phase_estimates,
    })
}

/// Stage 0 plus stages 1…S.
#[derive(Debug, Clone, PartialEq)]
pub struct PpicTrace {
    pub initial: ConventionalOutput,
    pub stages: Vec<StageState>,
}

impl PpicTrace {
    /// Decisions of the last stage.
    pub fn final_bits(&self) -> &SymbolFrame {
        self.stages
            .last()
            .map(|s| &s.bit_estimates)
            .unwrap_or(&self.initial.bits)
    }
}

/// Conventional detection followed by `config.stages()` cancelation stages.
pub fn run_ppic(
    frame: &ReceivedFrame,
    codes: &SpreadingCodeSet,
    quarter_info: &[QuarterIndex],
    config: &PpicConfig,
) -> Result<PpicTrace> {
    let initial = conventional_detect(frame, codes, quarter_info)?;
    run_ppic_from(frame, codes, quarter_info, config, initial)
}

/// Like [`run_ppic`] but reuses an already computed stage-0 output.
pub fn run_ppic_from(
    frame: &ReceivedFrame,
    codes: &SpreadingCodeSet,
    quarter_info: &[QuarterIndex],
    config: &PpicConfig,
    initial: ConventionalOutput,
) -> Result<PpicTrace> {
    let mut stages: Vec<StageState> = Vec::with_capacity(config.stages());
    for s in 1..=config.stages() {
        let prev = stages
            .last()
            .map(|st| &st.bit_estimates)
            .unwrap_or(&initial.bits);
        let next = run_stage(frame, codes, prev, quarter_info, config, s)?;
        stages.push(next);
    }
    Ok(PpicTrace { initial, stages })
}
