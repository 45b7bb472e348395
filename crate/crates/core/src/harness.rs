//! Monte Carlo BER and phase-estimate experiments.
//!
//! Every sweep point (M, N) simulates `frames_per_point` symbol frames.
//! Frames are grouped into runs of `symbols_per_run` consecutive symbols
//! that share one channel process, so fading evolves in time and
//! unbalanced gains stay fixed within a run. Each run draws its channel
//! from a substream keyed by (seed, point, run) and each frame draws bits,
//! codes and noise from a substream keyed by (seed, point, frame). Runs
//! execute in parallel and are reduced in index order, so results do not
//! depend on scheduling.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::ChannelProcess;
use crate::config::{DetectorKind, ExperimentConfig};
use crate::detectors::{conventional_detect, run_ppic_from, PpicConfig, PpicTrace, Variant};
use crate::error::{config, Error, Result};
use crate::signal_model::{generate_codes, synthesize_frame, SymbolFrame};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

const CHANNEL_STREAM: u64 = 0x6368_616e;
const FRAME_STREAM: u64 = 0x6672_616d;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an independent random substream identified by `path`.
pub fn substream_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |h, p| splitmix64(h ^ splitmix64(*p)))
}

/// Normal-approximation 95% half-width of an error proportion.
pub fn ci95_half_width(errors: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = errors as f64 / total as f64;
    Z95 * (p * (1.0 - p) / total as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub detector: DetectorKind,
    pub users: usize,
    pub code_length: usize,
    pub stage: usize,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerReport {
    pub rows: Vec<BerRow>,
}

impl BerReport {
    pub fn get(
        &self,
        detector: DetectorKind,
        users: usize,
        code_length: usize,
        stage: usize,
    ) -> Option<&BerRow> {
        self.rows.iter().find(|r| {
            r.detector == detector
                && r.users == users
                && r.code_length == code_length
                && r.stage == stage
        })
    }

    /// Headline row: the last stage of a detector at one sweep point.
    pub fn final_stage(
        &self,
        detector: DetectorKind,
        users: usize,
        code_length: usize,
    ) -> Option<&BerRow> {
        self.rows
            .iter()
            .filter(|r| r.detector == detector && r.users == users && r.code_length == code_length)
            .max_by_key(|r| r.stage)
    }
}

/// Mean phase estimate of the pinned user, pooled over all user counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub detector: DetectorKind,
    pub code_length: usize,
    pub stage: usize,
    pub mean_phase_rad: f64,
    pub runs: u64,
}

impl PhaseRow {
    /// Mean phase in multiples of π/8.
    pub fn mean_phase_pi8(&self) -> f64 {
        self.mean_phase_rad / (PI / 8.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseReport {
    pub rows: Vec<PhaseRow>,
}

impl PhaseReport {
    pub fn get(
        &self,
        detector: DetectorKind,
        code_length: usize,
        stage: usize,
    ) -> Option<&PhaseRow> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.code_length == code_length && r.stage == stage)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reports {
    pub ber: BerReport,
    pub phase: PhaseReport,
    /// Composite fading magnitudes clamped to unit gain.
    pub fading_clamps: u64,
}

/// Per-detector, per-stage counters for one run.
#[derive(Debug, Clone, Default)]
struct Tally {
    errors: Vec<Vec<u64>>,
    phase_sums: Vec<Vec<f64>>,
    frames: u64,
    clamps: u64,
}

impl Tally {
    fn new(detectors: usize, stages: usize) -> Self {
        Self {
            errors: vec![vec![0; stages + 1]; detectors],
            phase_sums: vec![vec![0.0; stages + 1]; detectors],
            frames: 0,
            clamps: 0,
        }
    }

    fn absorb(&mut self, other: &Tally) {
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.phase_sums.iter_mut().zip(&other.phase_sums) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.frames += other.frames;
        self.clamps += other.clamps;
    }
}

struct Point {
    index: u64,
    users: usize,
    code_length: usize,
    ppic: Vec<Option<PpicConfig>>,
}

fn simulate_run(cfg: &ExperimentConfig, point: &Point, run: u64) -> Result<Tally> {
    let stages = cfg.stages;
    let mut tally = Tally::new(cfg.detectors.len(), stages);
    let noise = cfg.noise()?;
    let mut channel_rng = ChaCha8Rng::seed_from_u64(substream_seed(
        cfg.seed,
        &[CHANNEL_STREAM, point.index, run],
    ));
    let mut process = ChannelProcess::new(
        &cfg.scenario,
        point.users,
        point.code_length,
        &mut channel_rng,
    )?;
    let first = run * cfg.symbols_per_run as u64;
    let last = (first + cfg.symbols_per_run as u64).min(cfg.frames_per_point as u64);
    for frame_index in first..last {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(
            cfg.seed,
            &[FRAME_STREAM, point.index, frame_index],
        ));
        let mut channel = process.next_channel(frame_index - first, &mut channel_rng)?;
        if let Some(pin) = cfg.pinned_phase {
            channel = channel.with_phase(pin.user, pin.phase)?;
        }
        let truth = SymbolFrame::random(point.users, &mut rng);
        let codes = generate_codes(point.users, point.code_length, &mut rng)?;
        let frame = synthesize_frame(&truth, &channel, &codes, &noise, &mut rng)?;
        let quarters = channel.quarter_info();
        let initial = conventional_detect(&frame, &codes, quarters)?;
        let initial_errors = initial.bits.errors_against(&truth) as u64;
        for (d, ppic) in point.ppic.iter().enumerate() {
            let pinned = cfg.pinned_phase.map(|p| p.user);
            match ppic {
                None => {
                    tally.errors[d][0] += initial_errors;
                    if let Some(u) = pinned {
                        tally.phase_sums[d][0] += initial.phase_estimates[u];
                    }
                }
                Some(pc) => {
                    let trace: PpicTrace =
                        run_ppic_from(&frame, &codes, quarters, pc, initial.clone())?;
                    tally.errors[d][0] += initial_errors;
                    for st in &trace.stages {
                        tally.errors[d][st.stage] += st.bit_estimates.errors_against(&truth) as u64;
                    }
                    if let Some(u) = pinned {
                        tally.phase_sums[d][0] += trace.initial.phase_estimates[u];
                        for st in &trace.stages {
                            tally.phase_sums[d][st.stage] += st.phase_estimates[u];
                        }
                    }
                }
            }
        }
        tally.frames += 1;
    }
    tally.clamps = process.clamp_events();
    Ok(tally)
}

/// Runs every sweep point for every enabled detector.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Reports> {
    cfg.validate()?;
    let mut points = Vec::new();
    for &users in &cfg.user_counts {
        for &code_length in &cfg.code_lengths {
            let ppic = cfg
                .detectors
                .iter()
                .map(|d| match d.variant() {
                    None => Ok(None),
                    Some(v) => {
                        let bank = match v {
                            Variant::ModifiedLmsPpic => cfg.lms_bank(users)?,
                            Variant::ModifiedPlmsPpic => cfg.bank.build(users)?,
                        };
                        PpicConfig::new(cfg.stages, bank, v).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(Point {
                index: points.len() as u64,
                users,
                code_length,
                ppic,
            });
        }
    }

    let runs = cfg.frames_per_point.div_ceil(cfg.symbols_per_run) as u64;
    let mut totals = Vec::with_capacity(points.len());
    for point in &points {
        let tallies = (0..runs)
            .into_par_iter()
            .map(|run| simulate_run(cfg, point, run))
            .collect::<Result<Vec<_>>>()?;
        let mut total = Tally::new(cfg.detectors.len(), cfg.stages);
        for t in &tallies {
            total.absorb(t);
        }
        totals.push(total);
    }

    let mut reports = Reports::default();
    for (d, detector) in cfg.detectors.iter().enumerate() {
        let stage_count = if detector.variant().is_some() {
            cfg.stages + 1
        } else {
            1
        };
        for (point, total) in points.iter().zip(&totals) {
            let bits = total.frames * point.users as u64;
            for stage in 0..stage_count {
                let errors = total.errors[d][stage];
                reports.ber.rows.push(BerRow {
                    detector: *detector,
                    users: point.users,
                    code_length: point.code_length,
                    stage,
                    bits,
                    errors,
                    ber: errors as f64 / bits as f64,
                    ci95: ci95_half_width(errors, bits),
                });
            }
        }
        if cfg.pinned_phase.is_some() {
            for &code_length in &cfg.code_lengths {
                for stage in 0..stage_count {
                    let (sum, runs) = points
                        .iter()
                        .zip(&totals)
                        .filter(|(p, _)| p.code_length == code_length)
                        .fold((0.0, 0), |(s, n), (_, t)| {
                            (s + t.phase_sums[d][stage], n + t.frames)
                        });
                    reports.phase.rows.push(PhaseRow {
                        detector: *detector,
                        code_length,
                        stage,
                        mean_phase_rad: sum / runs as f64,
                        runs,
                    });
                }
            }
        }
    }
    reports.fading_clamps = totals.iter().map(|t| t.clamps).sum();
    Ok(reports)
}

pub const BER_HEADER: &str = "detector,M,N,stage,bits,errors,ber,ci95";
pub const PHASE_HEADER: &str = "detector,N,stage,mean_phase_rad,mean_phase_pi8,runs";

pub fn ber_csv(report: &BerReport) -> String {
    let mut out = String::from(BER_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.detector, r.users, r.code_length, r.stage, r.bits, r.errors, r.ber, r.ci95
        ));
    }
    out
}

pub fn phase_csv(report: &PhaseReport) -> String {
    let mut out = String::from(PHASE_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.detector,
            r.code_length,
            r.stage,
            r.mean_phase_rad,
            r.mean_phase_pi8(),
            r.runs
        ));
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}

/// Writes `ber.csv` and `phase.csv` into `out_dir`, creating it if needed.
pub fn emit_reports(reports: &Reports, out_dir: &Path) -> Result<()> {
    if reports.ber.rows.is_empty() {
        return Err(config("nothing to write: the BER report is empty"));
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_owned(),
        source,
    })?;
    write_file(&out_dir.join("ber.csv"), &ber_csv(&reports.ber))?;
    write_file(&out_dir.join("phase.csv"), &phase_csv(&reports.phase))
}
