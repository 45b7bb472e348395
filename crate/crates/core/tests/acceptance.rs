//! Acceptance criteria. Each test prints one `[criterion] PASS|FAIL` line;
//! run with `cargo test --test acceptance -- --nocapture` to see them.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use ppic::channels::{FadingProcessState, ScenarioKind, ScenarioSpec};
use ppic::config::{DetectorKind, ExperimentConfig, PinnedPhase};
use ppic::detectors::{
    estimate_phase, magnitude_mismatch, nlms_bank_run, nlms_bank_run_observed, phase_candidates,
    run_ppic, PpicConfig, StepSizeBank, Variant,
};
use ppic::harness::{ber_csv, emit_reports, phase_csv, run_experiment, BerReport, BerRow, Reports};
use ppic::signal_model::{
    generate_codes, normalize_angle, quarter_midpoint, quarter_of, random_phase, synthesize_frame,
    ChannelState, NoiseModel, QuarterIndex, SymbolFrame,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, ok: bool, detail: impl AsRef<str>) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("[{name}] {verdict}: {}", detail.as_ref());
}

fn check(name: &str, ok: bool, detail: String) {
    report(name, ok, &detail);
    assert!(ok, "{name}: {detail}");
}

/// `lower` ≤ `upper` in BER, or the two 95% intervals overlap.
fn not_worse(lower: &BerRow, upper: &BerRow) -> bool {
    lower.ber <= upper.ber || lower.ber - lower.ci95 <= upper.ber + upper.ci95
}

fn final_row(rep: &BerReport, d: DetectorKind, m: usize, n: usize) -> &BerRow {
    rep.final_stage(d, m, n).expect("row present")
}

fn sweep(kind: ScenarioKind) -> ExperimentConfig {
    ExperimentConfig {
        user_counts: vec![5, 10, 15],
        code_lengths: vec![64],
        snr_db: 0.0,
        stages: 2,
        scenario: ScenarioSpec::new(kind),
        // 4000 frames × M users ≥ 2·10⁴ bits at every point
        frames_per_point: 4000,
        ..Default::default()
    }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.2?} (limit {:?})", t, limit))
}

#[test]
fn criterion_1_noiseless_sanity() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        user_counts: vec![1, 5],
        code_lengths: vec![64],
        noise_variance: Some(1e-12),
        stages: 2,
        frames_per_point: 100,
        ..Default::default()
    };
    let rep = run_experiment(&cfg).unwrap();
    let errors: u64 = rep.ber.rows.iter().map(|r| r.errors).sum();
    let detectors: Vec<_> = rep.ber.rows.iter().map(|r| r.detector).collect();
    let all_three = DetectorKind::ALL.iter().all(|d| detectors.contains(d));
    let (fast, time) = within(start, Duration::from_secs(10));
    check(
        "1 noiseless sanity",
        errors == 0 && all_three && fast,
        format!(
            "{errors} bit errors over {} rows, {time}",
            rep.ber.rows.len()
        ),
    );
}

fn table_one_config(frames: usize) -> ExperimentConfig {
    ExperimentConfig {
        user_counts: vec![15],
        code_lengths: vec![64, 256],
        snr_db: 0.0,
        stages: 3,
        frames_per_point: frames,
        detectors: vec![DetectorKind::ModifiedPlmsPpic],
        pinned_phase: Some(PinnedPhase {
            user: 0,
            phase: 3.0 * PI / 8.0,
        }),
        ..Default::default()
    }
}

fn table_one_cells(frames: usize) -> (bool, String) {
    let rep = run_experiment(&table_one_config(frames)).unwrap();
    let mut ok = true;
    let mut cells = Vec::new();
    for n in [64, 256] {
        for stage in [2, 3] {
            let row = rep
                .phase
                .get(DetectorKind::ModifiedPlmsPpic, n, stage)
                .expect("phase row");
            let v = row.mean_phase_pi8();
            ok &= (2.4..=3.7).contains(&v) && row.runs == frames as u64;
            cells.push(format!("N={n} s={stage}: {v:.3}π/8"));
        }
    }
    (ok, cells.join(", "))
}

#[test]
fn criterion_2_table_one_anchor() {
    let start = Instant::now();
    let (ok, cells) = table_one_cells(10);
    let (fast, time) = within(start, Duration::from_secs(60));
    check(
        "2 phase estimate anchor (10 runs)",
        ok && fast,
        format!("{cells}; {time}"),
    );
    let (ok, cells) = table_one_cells(2000);
    check("2 phase estimate anchor (2000 runs)", ok, cells);
}

fn ordering(kind: ScenarioKind, name: &str, with_lms_vs_plms: bool) -> Reports {
    let start = Instant::now();
    let cfg = sweep(kind);
    let rep = run_experiment(&cfg).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for &m in &cfg.user_counts {
        let conv = final_row(&rep.ber, DetectorKind::Conventional, m, 64);
        let lms = final_row(&rep.ber, DetectorKind::ModifiedLmsPpic, m, 64);
        let plms = final_row(&rep.ber, DetectorKind::ModifiedPlmsPpic, m, 64);
        ok &= conv.bits >= 20_000;
        ok &= not_worse(plms, conv) && not_worse(lms, conv);
        if with_lms_vs_plms {
            ok &= not_worse(plms, lms);
        }
        detail.push(format!(
            "M={m}: conv {:.2e} lms {:.2e} plms {:.2e}",
            conv.ber, lms.ber, plms.ber
        ));
    }
    let (fast, time) = within(start, Duration::from_secs(300));
    check(name, ok && fast, format!("{}; {time}", detail.join("; ")));
    rep
}

#[test]
fn criterion_3_detector_ordering_balanced() {
    ordering(ScenarioKind::Balanced, "3 balanced ordering", true);
}

#[test]
fn criterion_4_unbalanced_robustness() {
    let rep = ordering(ScenarioKind::Unbalanced, "4 unbalanced robustness", false);
    assert!(rep.ber.rows.iter().all(|r| r.bits > 0));
}

#[test]
fn criterion_5_fading() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        detectors: vec![DetectorKind::Conventional, DetectorKind::ModifiedPlmsPpic],
        ..sweep(ScenarioKind::RayleighFading)
    };
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let deterministic = a == b;
    let mut ok = deterministic;
    let mut detail = Vec::new();
    for &m in &cfg.user_counts {
        let conv = final_row(&a.ber, DetectorKind::Conventional, m, 64);
        let plms = final_row(&a.ber, DetectorKind::ModifiedPlmsPpic, m, 64);
        ok &= not_worse(plms, conv);
        detail.push(format!(
            "M={m}: conv {:.2e} plms {:.2e}",
            conv.ber, plms.ber
        ));
    }
    let (fast, time) = within(start, Duration::from_secs(300));
    check(
        "5 fading",
        ok && fast,
        format!(
            "deterministic={deterministic}, {}; clamps {}; {time}",
            detail.join("; "),
            a.fading_clamps
        ),
    );
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn criterion_6a_bank_selection_optimality() {
    let mut r = rng(61);
    let mut iterations = 0usize;
    let mut violations = 0usize;
    while iterations < 1000 {
        let users = r.random_range(2..=12);
        let n = r.random_range(8..=64);
        let codes = generate_codes(users, n, &mut r).unwrap();
        let ch =
            ChannelState::balanced((0..users).map(|_| random_phase(&mut r)).collect()).unwrap();
        let truth = SymbolFrame::random(users, &mut r);
        let noise = NoiseModel::from_snr_db(r.random_range(-5.0..10.0)).unwrap();
        let frame = synthesize_frame(&truth, &ch, &codes, &noise, &mut r).unwrap();
        let prev = SymbolFrame::random(users, &mut r);
        let bank = StepSizeBank::uniform(users, r.random_range(1..=8)).unwrap();
        nlms_bank_run_observed(&frame, &prev, &codes, &bank, |it| {
            iterations += 1;
            let energy: f64 = it.regressor.iter().map(|x| x * x).sum();
            let estimate: Complex64 = it
                .previous
                .iter()
                .zip(it.regressor)
                .map(|(w, x)| w * x)
                .sum();
            let e = it.sample - estimate;
            let candidates: Vec<Vec<Complex64>> = bank
                .mus()
                .iter()
                .map(|mu| {
                    it.previous
                        .iter()
                        .zip(it.regressor)
                        .map(|(w, x)| w + e * (mu * x / energy))
                        .collect()
                })
                .collect();
            let scores: Vec<f64> = candidates.iter().map(|c| magnitude_mismatch(c)).collect();
            let chosen = magnitude_mismatch(it.current);
            if scores.iter().any(|s| chosen > s + 1e-12)
                || (chosen - scores[it.selected]).abs() > 1e-12
            {
                violations += 1;
            }
        })
        .unwrap();
    }
    check(
        "6a bank-selection optimality",
        violations == 0,
        format!("{violations} violations over {iterations} iterations"),
    );
}

#[test]
fn criterion_6b_single_step_equivalence() {
    let mut r = rng(62);
    let mut mismatches = 0;
    for _ in 0..100 {
        let users = r.random_range(2..=15);
        let codes = generate_codes(users, 64, &mut r).unwrap();
        let ch =
            ChannelState::balanced((0..users).map(|_| random_phase(&mut r)).collect()).unwrap();
        let truth = SymbolFrame::random(users, &mut r);
        let frame = synthesize_frame(
            &truth,
            &ch,
            &codes,
            &NoiseModel::from_snr_db(0.0).unwrap(),
            &mut r,
        )
        .unwrap();
        let bank = StepSizeBank::from_multipliers(users, &[r.random_range(0.01..=1.0)]).unwrap();
        let lms = PpicConfig::new(2, bank.clone(), Variant::ModifiedLmsPpic).unwrap();
        let plms = PpicConfig::new(2, bank, Variant::ModifiedPlmsPpic).unwrap();
        let a = run_ppic(&frame, &codes, ch.quarter_info(), &lms).unwrap();
        let b = run_ppic(&frame, &codes, ch.quarter_info(), &plms).unwrap();
        if a != b {
            mismatches += 1;
        }
    }
    check(
        "6b L=1 equivalence",
        mismatches == 0,
        format!("{mismatches} of 100 frames differ"),
    );
}

#[test]
fn criterion_6c_phase_estimator_cases() {
    let mut r = rng(63);
    let (mut in_quarter, mut fallback, mut bad) = (0, 0, 0);
    for _ in 0..10_000 {
        let w = Complex64::from_polar(r.random_range(1e-3..3.0), r.random_range(-PI..PI));
        let quarter = QuarterIndex::new(r.random_range(1..=4)).unwrap();
        let est = estimate_phase(w, quarter).unwrap();
        let candidates = phase_candidates(w).unwrap();
        let hits: Vec<f64> = candidates
            .iter()
            .copied()
            .filter(|c| quarter_of(*c).unwrap() == quarter)
            .collect();
        if hits.is_empty() {
            fallback += 1;
            bad += usize::from(est != quarter_midpoint(quarter));
        } else {
            in_quarter += 1;
            bad += usize::from(quarter_of(est).unwrap() != quarter || est != hits[0]);
        }
        bad += usize::from(!(0.0..TAU).contains(&est));
    }
    check(
        "6c phase estimator coverage",
        bad == 0 && in_quarter > 0 && fallback > 0,
        format!("{in_quarter} in-quarter, {fallback} fallback, {bad} wrong"),
    );
}

#[test]
fn criterion_6d_convergence() {
    let mut r = rng(64);
    let users = 4;
    let (mut worst_mag, mut worst_phase) = (0f64, 0f64);
    for _ in 0..50 {
        let codes = generate_codes(users, 256, &mut r).unwrap();
        let phases: Vec<f64> = (0..users).map(|_| random_phase(&mut r)).collect();
        let ch = ChannelState::balanced(phases.clone()).unwrap();
        let truth = SymbolFrame::random(users, &mut r);
        let noiseless = NoiseModel::from_variance(1e-300).unwrap();
        let frame = synthesize_frame(&truth, &ch, &codes, &noiseless, &mut r).unwrap();
        let bank = StepSizeBank::uniform(users, 4).unwrap();
        let w = nlms_bank_run(&frame, &truth, &codes, &bank).unwrap();
        for (wm, phi) in w.as_slice().iter().zip(&phases) {
            worst_mag = worst_mag.max((wm.norm() - 1.0).abs());
            let d = normalize_angle(wm.arg() - phi).unwrap();
            worst_phase = worst_phase.max(d.min(TAU - d));
        }
    }
    check(
        "6d NLMS bank convergence",
        worst_mag < 0.1 && worst_phase < 0.05,
        format!("max ||w|−1| = {worst_mag:.2e}, max phase error = {worst_phase:.2e} rad"),
    );
}

/// J₀(x) = (1/π) ∫₀^π cos(x sin t) dt, composite Simpson.
fn bessel_j0(x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0 / PI
}

#[test]
fn criterion_6e_jakes_autocorrelation() {
    let mut r = rng(65);
    let mut results = Vec::new();
    let mut ok = true;
    // the specified 1 MHz chip rate, and a slow one giving 2π f_D Δt = 2
    for chip_rate in [1e6, 64.0 * TAU * 40.0 / 2.0] {
        let spec = ScenarioSpec {
            chip_rate_hz: chip_rate,
            ..ScenarioSpec::new(ScenarioKind::RayleighFading)
        };
        let dt = spec.symbol_duration(64);
        let (mut cross, mut power) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..10_000 {
            let mut state = FadingProcessState::new(&spec, 1, &mut r);
            let k = r.random_range(0..10_000u64) as f64;
            state.advance(k * dt);
            let a = state.tap_coefficients(0)[0];
            state.advance((k + 1.0) * dt);
            let b = state.tap_coefficients(0)[0];
            cross += a * b.conj();
            power += 0.5 * (a.norm_sqr() + b.norm_sqr());
        }
        let got = cross.re / power;
        let want = bessel_j0(TAU * spec.doppler_hz * dt);
        ok &= (got - want).abs() <= 0.1;
        results.push(format!("Δt={dt:.3e}s: {got:.4} vs J0 {want:.4}"));
    }
    check("6e Jakes autocorrelation", ok, results.join("; "));
}

#[test]
fn criterion_6f_seed_determinism() {
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in [
        ScenarioKind::Balanced,
        ScenarioKind::Unbalanced,
        ScenarioKind::RayleighFading,
    ] {
        let cfg = ExperimentConfig {
            user_counts: vec![3, 6],
            code_lengths: vec![32],
            frames_per_point: 150,
            symbols_per_run: 40,
            seed: 2024,
            scenario: ScenarioSpec::new(kind),
            pinned_phase: Some(PinnedPhase {
                user: 0,
                phase: 1.0,
            }),
            ..Default::default()
        };
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            emit_reports(&run_experiment(&cfg).unwrap(), d.path()).unwrap();
        }
        for file in ["ber.csv", "phase.csv"] {
            let a = std::fs::read(dirs[0].path().join(file)).unwrap();
            let b = std::fs::read(dirs[1].path().join(file)).unwrap();
            ok &= a == b && !a.is_empty();
        }
        let other = run_experiment(&ExperimentConfig {
            seed: 2025,
            ..cfg.clone()
        })
        .unwrap();
        let base = run_experiment(&cfg).unwrap();
        ok &= ber_csv(&other.ber) != ber_csv(&base.ber)
            || phase_csv(&other.phase) != phase_csv(&base.phase);
        detail.push(kind.name());
    }
    check(
        "6f seed determinism",
        ok,
        format!("byte-identical CSVs for {}", detail.join(", ")),
    );
}
