//! End-to-end acceptance checks. Runs as a plain binary (`harness = false`)
//! so that every criterion reports one PASS/FAIL line even when an earlier
//! one fails:
//!
//!     cargo test -p skylink-core --test acceptance
//!
//! The process exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use skylink::budget::{
    inverse_fit, jitter_intensity_noise, linspace, mean_photon_number, relative_shot_noise,
    BudgetInputs, JitterEstimator,
};
use skylink::commands::{self, Command};
use skylink::config::RawConfig;
use skylink::jitter::PresetKnobs;
use skylink::profile::{analyze_sequence, synthesize_sequence, Background, FrameGeometry, SynthesisParams};
use skylink::rng::{standard_normals, Domain};
use skylink::spectrum::{self, psd, welch, PhotocurrentModel, SpectrumConfig, TimeSeries};
use skylink::stokes::{
    apply_channel, excess_noise_estimate, measure_s2, variance, BootstrapOptions, ChannelParams,
    CoherentPolarizationState,
};
use skylink::{
    budget, center_stats, clipped_power_fraction, reference, sample_centers, CircularAperture,
    GaussianBeam, JitterSpec, Point, Scenario, ScenarioPreset,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_err(value: f64, expected: f64) -> f64 {
    (value / expected - 1.0).abs()
}

fn within_budget(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn reference_inputs() -> BudgetInputs {
    BudgetInputs::new(
        reference::OPTICAL_POWER_W,
        reference::WAVELENGTH_NM,
        reference::VIDEO_BANDWIDTH_HZ,
    )
    .unwrap()
}

fn reference_rsn() -> f64 {
    relative_shot_noise(mean_photon_number(&reference_inputs()).unwrap()).unwrap()
}

fn focussed_noise(estimator: JitterEstimator, n: usize) -> f64 {
    let beam = GaussianBeam::unit(reference::BEAM_DIAMETER_MM).unwrap();
    let ap = CircularAperture::centered(reference::PHOTODIODE_DIAMETER_MM).unwrap();
    let jitter = JitterSpec::isotropic(reference::JITTER_STD_MM, reference::MISALIGNMENT_MM).unwrap();
    jitter_intensity_noise(&beam, &ap, &jitter, estimator, n, ENSEMBLE_SEED, 1e-12).unwrap()
}

const ENSEMBLE_SEED: u64 = 2024;
const ENSEMBLE_SAMPLES: usize = 100_000;

fn photon_number() -> Outcome {
    let inputs = reference_inputs();
    let n = mean_photon_number(&inputs).unwrap();
    let e = budget::photon_energy(reference::WAVELENGTH_NM).unwrap();
    let en = rel_err(n, 2.65e13);
    let ee = rel_err(e, 2.45e-19);
    check(
        en <= 0.01 && ee <= 0.005,
        format!("n={n:.4e} (rel err {en:.2e}, tol 1e-2), E={e:.4e} J (rel err {ee:.2e}, tol 5e-3)"),
    )
}

fn shot_noise() -> Outcome {
    let rsn = reference_rsn();
    let err = rel_err(rsn, 1.94e-7);
    check(err <= 0.01, format!("rsn={rsn:.4e} (rel err {err:.2e}, tol 1e-2)"))
}

/// Captured fraction of a unit 1/e² beam (diameter `d`) whose center is at
/// `c`, on a centered aperture of radius `r_ap`, by midpoint summation on a
/// beam-centered grid. The Gaussian is separable, so each grid row
/// contributes `g(y)·h·[C(x_hi) − C(x_lo)]` where `C` is the running sum of
/// the one-dimensional profile with the boundary cell taken fractionally.
struct GridOracle {
    h: f64,
    half: f64,
    row_weight: Vec<f64>,
    prefix: Vec<f64>,
    r_ap: f64,
}

impl GridOracle {
    fn new(d: f64, r_ap: f64, h: f64) -> Self {
        let w = 0.5 * d;
        let half = 4.0 * w;
        let cells = (2.0 * half / h).round() as usize;
        let norm = (2.0 / std::f64::consts::PI).sqrt() / w;
        let weight: Vec<f64> = (0..cells)
            .map(|k| {
                let x = -half + (k as f64 + 0.5) * h;
                norm * (-2.0 * x * x / (w * w)).exp() * h
            })
            .collect();
        let mut prefix = Vec::with_capacity(cells + 1);
        prefix.push(0.0);
        for v in &weight {
            prefix.push(prefix.last().unwrap() + v);
        }
        Self {
            h,
            half,
            row_weight: weight,
            prefix,
            r_ap,
        }
    }

    fn cumulative(&self, x: f64) -> f64 {
        let t = ((x + self.half) / self.h).clamp(0.0, self.row_weight.len() as f64);
        let k = t.floor() as usize;
        if k >= self.row_weight.len() {
            return *self.prefix.last().unwrap();
        }
        self.prefix[k] + (t - k as f64) * self.row_weight[k]
    }

    fn fraction(&self, center: Point) -> f64 {
        // aperture center in the beam frame
        let (ax, ay) = (-center.x, -center.y);
        let mut total = 0.0;
        for (j, wy) in self.row_weight.iter().enumerate() {
            let y = -self.half + (j as f64 + 0.5) * self.h;
            let dy = y - ay;
            if dy.abs() >= self.r_ap {
                continue;
            }
            let s = (self.r_ap * self.r_ap - dy * dy).sqrt();
            total += wy * (self.cumulative(ax + s) - self.cumulative(ax - s));
        }
        total
    }
}

fn focussed_jitter() -> Outcome {
    let start = Instant::now();
    let two_point = focussed_noise(JitterEstimator::TwoPoint, 0);
    let ensemble = focussed_noise(JitterEstimator::EnsembleRms, ENSEMBLE_SAMPLES);

    let oracle = GridOracle::new(
        reference::BEAM_DIAMETER_MM,
        0.5 * reference::PHOTODIODE_DIAMETER_MM,
        1e-3,
    );
    let jitter = JitterSpec::isotropic(reference::JITTER_STD_MM, reference::MISALIGNMENT_MM).unwrap();
    let centers = sample_centers(&jitter, ENSEMBLE_SAMPLES, ENSEMBLE_SEED).unwrap();
    let fractions: Vec<f64> = centers.points().par_iter().map(|c| oracle.fraction(*c)).collect();
    let n = fractions.len() as f64;
    let mean = fractions.iter().sum::<f64>() / n;
    let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let grid = var.sqrt() / mean;
    let elapsed = start.elapsed();

    let factor = two_point / reference::FOCUSSED_JITTER_NOISE;
    let agree = rel_err(ensemble, grid);
    check(
        (0.5..=2.0).contains(&factor) && agree <= 0.05 && within_budget(elapsed, 60),
        format!(
            "two_point={two_point:.3e} (x{factor:.2} of 7e-8, allowed x0.5..x2), \
             ensemble_rms={ensemble:.4e} vs grid sum {grid:.4e} (rel diff {agree:.2e}, tol 5e-2), {:.1}s of 60s",
            elapsed.as_secs_f64()
        ),
    )
}

fn focussed_below_qnl() -> Outcome {
    let rin = focussed_noise(JitterEstimator::TwoPoint, 0);
    let rsn = reference_rsn();
    let preset = ScenarioPreset::new(Scenario::AtmosphereFocussed, &PresetKnobs::default()).unwrap();
    let run = simulate_preset(&preset, 11);
    let dev = run.normalized.max_relative_deviation(0.0);
    check(
        rin < rsn && dev <= reference::TRACE_ACCURACY,
        format!(
            "jitter noise {rin:.3e} < shot noise {rsn:.3e}: {}; normalized trace max |ratio-1| = {dev:.4} (tol 0.05)",
            rin < rsn
        ),
    )
}

fn simulate_preset(preset: &ScenarioPreset, seed: u64) -> spectrum::SpectrumRun {
    let ap = CircularAperture::centered(reference::PHOTODIODE_DIAMETER_MM).unwrap();
    let model = PhotocurrentModel::from_preset(preset, ap, reference_rsn(), spectrum::DEFAULT_KNEE_HZ).unwrap();
    spectrum::simulate_spectrum(&model, &SpectrumConfig::default(), seed).unwrap()
}

fn low_end_for(diameter: f64, sigma: f64) -> f64 {
    let knobs = PresetKnobs {
        unfocussed_diameter: diameter,
        unfocussed_factor: sigma / reference::JITTER_STD_MM,
        ..PresetKnobs::default()
    };
    let preset = ScenarioPreset::new(Scenario::AtmosphereUnfocussed, &knobs).unwrap();
    simulate_preset(&preset, 12).normalized.power_db[0]
}

fn unfocussed_feasibility() -> Outcome {
    let ap = CircularAperture::centered(reference::PHOTODIODE_DIAMETER_MM).unwrap();
    let target = reference::UNFOCUSSED_JITTER_NOISE;
    let fit = |d: (f64, f64, usize), s: (f64, f64, usize)| {
        inverse_fit(
            &ap,
            reference::MISALIGNMENT_MM,
            target,
            0.1,
            &linspace(d.0, d.1, d.2),
            &linspace(s.0, s.1, s.2),
            1e-12,
        )
        .unwrap()
    };
    let boxed = fit((1.5, 3.0, 16), (0.0134, 0.027, 8));
    let min_noise = boxed.points.iter().map(|p| p.noise).fold(f64::INFINITY, f64::min);

    if let Some(best) = boxed.best() {
        let db = low_end_for(best.diameter, best.sigma);
        return check(
            (3.0..=8.0).contains(&db),
            format!(
                "fit D={:.4} mm sigma={:.4} mm noise={:.3e}; low-end {db:.2} dB (need +3..+8)",
                best.diameter, best.sigma, best.noise
            ),
        );
    }

    // Not part of the verdict: where the target actually lies.
    let wide = fit((0.9, 1.5, 25), (0.0134, 0.027, 8));
    let hint = match wide.best() {
        Some(p) => format!(
            "; outside the box D={:.3} mm sigma={:.4} mm gives {:.3e} and a low-end of {:.2} dB",
            p.diameter,
            p.sigma,
            p.noise,
            low_end_for(p.diameter, p.sigma)
        ),
        None => String::new(),
    };
    Err(format!(
        "no (D, sigma) in [1.5, 3.0] mm x [0.0134, 0.027] mm within 10% of {target:e}; \
         smallest noise in the box is {min_noise:.3e}{hint}"
    ))
}

fn concentric_clipping() -> Outcome {
    let w = 0.5;
    let mut worst: f64 = 0.0;
    for ratio in [0.25, 0.5, 1.0, 2.0, 3.0] {
        let r = ratio * w;
        let beam = GaussianBeam::unit(2.0 * w).unwrap();
        let ap = CircularAperture::centered(2.0 * r).unwrap();
        let f = clipped_power_fraction(&beam, &ap, 1e-12).unwrap().fraction();
        let exact = -(-2.0 * ratio * ratio).exp_m1();
        worst = worst.max((f - exact).abs());
    }
    check(worst <= 1e-9, format!("max |F - (1 - exp(-2R^2/w^2))| = {worst:.2e} (tol 1e-9)"))
}

fn stokes_invariants() -> Outcome {
    let start = Instant::now();
    let vacuum = CoherentPolarizationState::new(1e8, 0.0, 0.0).unwrap();
    let v_vac = variance(&measure_s2(&vacuum, 1_000_000, 31).unwrap());

    let coherent = CoherentPolarizationState::new(1e8, 2.0, 0.0).unwrap();
    let lossy = apply_channel(&coherent, &ChannelParams::new(0.5, 0.0).unwrap()).unwrap();
    let v_loss = variance(&measure_s2(&lossy, 1_000_000, 32).unwrap());

    let channel = ChannelParams::new(0.8, 0.5).unwrap();
    let opts = BootstrapOptions::default();
    let covered = (0..100u64)
        .into_par_iter()
        .filter(|&trial| {
            let s = CoherentPolarizationState::new(1e8, 1.0, 0.0).unwrap();
            let before = measure_s2(&s, 2000, 1000 + 2 * trial).unwrap();
            let out = apply_channel(&s, &channel).unwrap();
            let after = measure_s2(&out, 2000, 1001 + 2 * trial).unwrap();
            let est = excess_noise_estimate(
                &before,
                &after,
                &BootstrapOptions { seed: trial, ..opts },
            )
            .unwrap();
            est.covers(0.5)
        })
        .count();
    let elapsed = start.elapsed();
    check(
        (v_vac - 1.0).abs() <= 0.01
            && (v_loss - 1.0).abs() <= 0.01
            && covered >= 95
            && within_budget(elapsed, 60),
        format!(
            "vacuum var {v_vac:.4} SNU, lossy var {v_loss:.4} SNU (tol 0.01); \
             {:.0}% CI covered 0.5 in {covered}/100 trials (need 95); {:.1}s of 60s",
            opts.confidence * 100.0,
            elapsed.as_secs_f64()
        ),
    )
}

fn spectrum_sanity() -> Outcome {
    let config = SpectrumConfig::default();
    let fs = config.sample_rate();
    let n = config.required_samples(fs);
    let std = 0.3;
    let values: Vec<f64> = standard_normals(77, Domain::ElectronicNoise, 0, n)
        .into_iter()
        .map(|v| v * std)
        .collect();
    let series = TimeSeries::new(values.clone(), fs).unwrap();

    let trace = psd(&series, &config).unwrap();
    let level = 10.0 * (2.0 * std * std / fs).log10();
    let flat = trace.power_db.iter().map(|db| (db - level).abs()).fold(0.0, f64::max);

    let pg = welch(&series, config.segment_len(fs), config.segments()).unwrap();
    let len = config.segment_len(fs);
    let analysed = &values[..len + len / 2 * (pg.segments - 1)];
    let m = analysed.iter().sum::<f64>() / analysed.len() as f64;
    let var = analysed.iter().map(|v| (v - m).powi(2)).sum::<f64>() / analysed.len() as f64;
    let parseval = rel_err(pg.total_power(), var);

    let doubled = TimeSeries::new(values.iter().map(|v| v * 2f64.sqrt()).collect(), fs).unwrap();
    let up = psd(&doubled, &config).unwrap();
    let step = up
        .power_db
        .iter()
        .zip(&trace.power_db)
        .map(|(a, b)| (a - b - 3.0103).abs())
        .fold(0.0, f64::max);

    check(
        flat <= 0.5 && parseval <= 0.01 && step <= 0.1,
        format!(
            "white trace within {flat:.3} dB of 2s^2/fs (tol 0.5); Parseval rel err {parseval:.2e} (tol 1e-2); \
             doubling step off +3.01 dB by at most {step:.2e} (tol 0.1)"
        ),
    )
}

fn profile_round_trip() -> Outcome {
    let start = Instant::now();
    let spec = JitterSpec::isotropic(reference::JITTER_STD_MM, 0.0).unwrap();
    let centers = sample_centers(&spec, reference::FRAMES_PER_SEQUENCE, 9).unwrap();
    let beam = GaussianBeam::unit(reference::BEAM_DIAMETER_MM).unwrap();
    let params = SynthesisParams {
        noise: beam.peak_intensity() / 1000.0,
        ..SynthesisParams::default()
    };
    let seq = synthesize_sequence(&beam, &centers, &FrameGeometry::default(), &params, 9).unwrap();
    let analysis = analyze_sequence(&seq, Background::default()).unwrap();
    let elapsed = start.elapsed();

    let sigma = analysis.stats.mean_radial_std;
    let sigma_err = rel_err(sigma, reference::JITTER_STD_MM);
    let (dx, dy) = analysis.mean_diameter;
    let d = 0.5 * (dx + dy);
    let d_err = rel_err(d, reference::BEAM_DIAMETER_MM);
    let truth = center_stats(&centers).unwrap().mean_radial_std;
    check(
        sigma_err <= 0.05 && d_err <= 0.02 && within_budget(elapsed, 30),
        format!(
            "sigma {sigma:.5} mm (rel err {sigma_err:.3}, tol 0.05; drawn {truth:.5}); \
             D4sigma {d:.4} mm (rel err {d_err:.4}, tol 0.02); {:.1}s of 30s",
            elapsed.as_secs_f64()
        ),
    )
}

const DETERMINISM_CONFIG: &str = "\
[run]
seed = 4242

[fit]
enabled = true

[stokes]
n_shots = 20000

[profile]
frames = 120
write_frames = true
";

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

fn determinism() -> Outcome {
    let raw = RawConfig::parse(DETERMINISM_CONFIG).unwrap();
    let mut differing = Vec::new();
    let mut files = 0;
    for command in [Command::Budget, Command::Spectrum, Command::Stokes, Command::Profile] {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let outputs = commands::run(command, &raw, None).unwrap();
                commands::write_outputs(dir.path(), &outputs).unwrap();
                snapshot(dir.path())
            })
            .collect();
        files += runs[0].len();
        if runs[0] != runs[1] {
            differing.push(command.name());
        }
    }
    check(
        differing.is_empty(),
        format!("{files} files per run compared byte for byte; differing commands: {differing:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("photon number and photon energy", photon_number),
        ("relative shot noise", shot_noise),
        ("focussed jitter noise and grid-sum oracle", focussed_jitter),
        ("focussed noise below the quantum limit", focussed_below_qnl),
        ("unfocussed inverse fit and spectrum", unfocussed_feasibility),
        ("concentric clipping closed form", concentric_clipping),
        ("Stokes variance and excess-noise coverage", stokes_invariants),
        ("spectrum flatness, Parseval, power doubling", spectrum_sanity),
        ("profile round trip", profile_round_trip),
        ("determinism of every command", determinism),
    ];

    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
