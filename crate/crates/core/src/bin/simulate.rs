//! Monte Carlo BER sweeps for the conventional, LMS-PPIC and PLMS-PPIC
//! receivers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ppic::config::ExperimentConfig;
use ppic::harness::{emit_reports, run_experiment};

#[derive(Debug, Parser)]
#[command(name = "simulate", version, about)]
struct Args {
    /// Flat key = value experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated user counts M.
    #[arg(long)]
    users: Option<String>,
    /// Comma-separated code lengths N.
    #[arg(long = "code-length")]
    code_length: Option<String>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    /// Uniform PLMS bank with this many step sizes.
    #[arg(long = "bank-size")]
    bank_size: Option<String>,
    /// balanced, unbalanced or fading.
    #[arg(long)]
    scenario: Option<String>,
    /// Frames per sweep point.
    #[arg(long)]
    frames: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory for ber.csv and phase.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated subset of conventional, lms-ppic, plms-ppic.
    #[arg(long)]
    detectors: Option<String>,
    /// Hold one user's channel phase fixed, as <user>:<radians>, users from 1.
    #[arg(long = "pin-phase")]
    pin_phase: Option<String>,
}

fn build_config(args: &Args) -> ppic::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = [
        ("user_counts", &args.users),
        ("code_lengths", &args.code_length),
        ("snr_db", &args.snr_db),
        ("stages", &args.stages),
        ("bank_size", &args.bank_size),
        ("scenario", &args.scenario),
        ("frames_per_point", &args.frames),
        ("seed", &args.seed),
        ("detectors", &args.detectors),
        ("pinned_phase", &args.pin_phase),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = build_config(&args).and_then(|cfg| {
        let reports = run_experiment(&cfg)?;
        emit_reports(&reports, &args.out)?;
        Ok(reports)
    });
    match result {
        Ok(reports) => {
            eprintln!(
                "wrote {} BER rows and {} phase rows to {}",
                reports.ber.rows.len(),
                reports.phase.rows.len(),
                args.out.display()
            );
            if reports.fading_clamps > 0 {
                eprintln!(
                    "{} fading magnitudes clamped to unit gain",
                    reports.fading_clamps
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("simulate: {e}");
            ExitCode::FAILURE
        }
    }
}
