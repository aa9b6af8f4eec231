//! Command pipelines behind the `skylink-sim` binary.
//!
//! Each command turns a [`ScenarioConfig`] into a list of named output files.
//! Nothing is written until the whole pipeline has succeeded.
//!
//! Column orders:
//! - `budget.csv`: `mean_photon_number,relative_shot_noise,relative_intensity_noise,noise_vs_qnl_db`
//! - `budget_sweep.csv`: the swept key, then the `budget.csv` columns
//! - `fit.csv`: `diameter_mm,sigma_mm,noise,feasible,refined`
//! - `spectrum.csv`: `frequency_hz,signal_db,reference_db,power_db_rel_qnl`
//! - `spectrum_normalized.csv`: `frequency_hz,power_db_rel_qnl`
//! - `stokes_before.csv`, `stokes_after.csv`: `index,state,s2_snu`
//! - `stokes_histogram.csv`: `s2_snu,before_count,after_count`
//! - `profile_frames.csv`: `index,cx_mm,cy_mm,dx_mm,dy_mm`
//! - `profile_centers.csv`: `index,x_mm,y_mm` (mean-shifted)

use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::beam::GaussianBeam;
use crate::budget::{
    amplitude_ratio_db, inverse_fit, jitter_intensity_noise, linspace, mean_photon_number,
    photon_energy, relative_shot_noise, DiameterConvention, JitterEstimator, NoiseReport,
};
use crate::config::{format_value, Param, RawConfig, ScenarioConfig, Source, Sweep};
use crate::error::{Error, Result};
use crate::jitter::{sample_centers, JitterSpec};
use crate::profile::{self, analyze_sequence, synthesize_sequence, SynthesisParams};
use crate::spectrum::{simulate_spectrum, PhotocurrentModel};
use crate::stokes::{self, apply_channel, excess_noise_estimate, measure_s2_stream, ChannelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Budget,
    Spectrum,
    Stokes,
    Profile,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Budget => "budget",
            Command::Spectrum => "spectrum",
            Command::Stokes => "stokes",
            Command::Profile => "profile",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "budget" => Ok(Command::Budget),
            "spectrum" => Ok(Command::Spectrum),
            "stokes" => Ok(Command::Stokes),
            "profile" => Ok(Command::Profile),
            other => Err(Error::Config(format!("unknown command `{other}`"))),
        }
    }
}

/// A file produced by a command, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub path: PathBuf,
    pub contents: Vec<u8>,
}

impl Output {
    fn text(path: impl Into<PathBuf>, contents: String) -> Self {
        Self {
            path: path.into(),
            contents: contents.into_bytes(),
        }
    }

    fn nested(self, dir: &str) -> Self {
        Self {
            path: Path::new(dir).join(self.path),
            contents: self.contents,
        }
    }
}

/// `key=value # source` lines.
#[derive(Default)]
struct Report {
    text: String,
}

impl Report {
    fn line(&mut self, key: &str, value: impl Display, source: Source) {
        let _ = writeln!(self.text, "{key}={value} # {source}");
    }

    fn param<T: Display>(&mut self, key: &str, p: &Param<T>) {
        self.line(key, &p.value, p.source);
    }

    fn derived(&mut self, key: &str, value: impl Display) {
        self.line(key, value, Source::Derived);
    }

    fn sci(&mut self, key: &str, value: f64) {
        self.derived(key, format!("{value:.6e}"));
    }
}

fn header(r: &mut Report, cfg: &ScenarioConfig, command: Command) {
    r.line("command", command.name(), Source::CommandLine);
    r.param("seed", &cfg.seed);
    r.line("scenario", cfg.scenario, cfg.source("scenario.name"));
}

fn geometry_lines(r: &mut Report, cfg: &ScenarioConfig) {
    r.param("beam_diameter_mm", &cfg.beam_diameter);
    let conv = match cfg.diameter_convention {
        DiameterConvention::OneOverESquared => "one_over_e2",
        DiameterConvention::Fwhm => "fwhm",
    };
    r.line("diameter_convention", conv, cfg.source("beam.diameter_convention"));
    r.param("aperture_diameter_mm", &cfg.aperture_diameter);
    r.param("jitter_std_x_mm", &cfg.std_x);
    r.param("jitter_std_y_mm", &cfg.std_y);
    r.param("misalignment_mm", &cfg.misalignment);
}

fn shot_noise(cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let n = mean_photon_number(&cfg.budget_inputs()?)?;
    Ok((n, relative_shot_noise(n)?))
}

fn rin(cfg: &ScenarioConfig, beam: &GaussianBeam) -> Result<f64> {
    jitter_intensity_noise(
        beam,
        &cfg.aperture()?,
        &cfg.jitter()?,
        cfg.estimator.value,
        cfg.n_samples.value,
        cfg.seed.value,
        cfg.tolerance.value,
    )
}

pub fn cmd_budget(cfg: &ScenarioConfig) -> Result<Vec<Output>> {
    let mut r = Report::default();
    header(&mut r, cfg, Command::Budget);
    r.line("optical_power_w", format!("{:.6e}", cfg.power_w.value), cfg.power_w.source);
    r.param("wavelength_nm", &cfg.wavelength_nm);
    r.param("video_bandwidth_hz", &cfg.video_bandwidth);
    geometry_lines(&mut r, cfg);
    r.line("estimator", cfg.estimator.value.name(), cfg.estimator.source);
    if cfg.estimator.value == JitterEstimator::EnsembleRms {
        r.param("n_samples", &cfg.n_samples);
    }
    r.line("tolerance", format!("{:e}", cfg.tolerance.value), cfg.tolerance.source);

    let rin_value = rin(cfg, &cfg.beam()?)?;
    let report = NoiseReport::new(&cfg.budget_inputs()?, rin_value)?;
    r.sci("photon_energy_j", photon_energy(cfg.wavelength_nm.value)?);
    r.sci("mean_photon_number", report.mean_photon_number);
    r.sci("relative_shot_noise", report.relative_shot_noise);
    r.sci("relative_intensity_noise", report.relative_intensity_noise);
    r.param("frequency_hz", &cfg.jitter_rate);
    r.derived("noise_vs_qnl_db", format!("{:.4}", report.noise_vs_qnl_db));
    let amp = if rin_value > 0.0 {
        format!("{:.4}", amplitude_ratio_db(rin_value, report.relative_shot_noise)?)
    } else {
        "-inf".to_string()
    };
    r.derived("amplitude_ratio_db", amp);
    r.derived("below_shot_noise", rin_value < report.relative_shot_noise);
    if cfg.diameter_convention == DiameterConvention::OneOverESquared {
        let fwhm_beam = cfg
            .beam()?
            .with_diameter(DiameterConvention::Fwhm.to_one_over_e2(cfg.beam_diameter.value))?;
        r.sci("relative_intensity_noise_if_diameter_is_fwhm", rin(cfg, &fwhm_beam)?);
    }

    let mut outputs = vec![Output::text(
        "budget.csv",
        format!("{}\n{}\n", NoiseReport::CSV_HEADER, report.to_csv_row()),
    )];

    if let Some(fit) = &cfg.fit {
        let (d0, d1, dn) = fit.diameters;
        let (s0, s1, sn) = fit.sigmas;
        let result = inverse_fit(
            &cfg.aperture()?,
            cfg.misalignment.value,
            fit.target.value,
            fit.rel_tol.value,
            &linspace(d0, d1, dn),
            &linspace(s0, s1, sn),
            cfg.tolerance.value,
        )?;
        r.line("fit_target", format!("{:.6e}", fit.target.value), fit.target.source);
        r.param("fit_rel_tol", &fit.rel_tol);
        r.line("fit_diameter_range_mm", format!("{d0}:{d1}:{dn}"), cfg.source("fit.diameter_min_mm"));
        r.line("fit_sigma_range_mm", format!("{s0}:{s1}:{sn}"), cfg.source("fit.sigma_min_mm"));
        r.derived("fit_feasible_points", result.feasible().count());
        match result.best() {
            Some(best) => {
                r.derived("fit_best_diameter_mm", format!("{:.6}", best.diameter));
                r.derived("fit_best_sigma_mm", format!("{:.6}", best.sigma));
                r.sci("fit_best_noise", best.noise);
            }
            None => r.derived("fit_best", "none"),
        }
        outputs.push(Output::text("fit.csv", result.to_csv()));
    }
    outputs.insert(0, Output::text("budget_report.txt", r.text));
    Ok(outputs)
}

pub fn cmd_spectrum(cfg: &ScenarioConfig) -> Result<Vec<Output>> {
    let (_, rsn) = shot_noise(cfg)?;
    let model = PhotocurrentModel {
        beam_diameter: cfg.beam_diameter.value,
        aperture: cfg.aperture()?,
        jitter: cfg.spectrum_jitter()?,
        relative_shot_noise: rsn,
        shot_reference_hz: cfg.shot_reference_hz.value,
        detector: cfg.detector,
        mean_level: 1.0,
    };
    let run = simulate_spectrum(&model, &cfg.spectrum, cfg.seed.value)?;
    let n = &run.normalized;

    let mut r = Report::default();
    header(&mut r, cfg, Command::Spectrum);
    geometry_lines(&mut r, cfg);
    r.param("knee_hz", &cfg.knee_hz);
    r.param("shot_reference_hz", &cfg.shot_reference_hz);
    r.line(
        "electronic_noise_db_below_qnl",
        cfg.detector.electronic_noise_db_below_qnl,
        cfg.source("detector.electronic_noise_db_below_qnl"),
    );
    let s = &cfg.spectrum;
    r.line("rbw_hz", s.rbw, cfg.source("spectrum.rbw_hz"));
    r.line("vbw_hz", s.vbw, cfg.source("spectrum.vbw_hz"));
    r.line("n_points", s.n_points, cfg.source("spectrum.n_points"));
    r.line("f_start_hz", s.f_start, cfg.source("spectrum.f_start_hz"));
    r.line("f_stop_hz", s.f_stop, cfg.source("spectrum.f_stop_hz"));
    r.line("traces", s.traces, cfg.source("spectrum.traces"));
    r.derived("segments_per_trace", s.segments());
    r.sci("relative_shot_noise", rsn);
    r.derived("low_end_frequency_hz", n.frequencies[0]);
    r.derived("low_end_db_rel_qnl", format!("{:.4}", n.power_db[0]));
    r.derived("low_end_mean5_db_rel_qnl", format!("{:.4}", n.low_end_db(5)));
    let f_mod = crate::reference::MODULATION_FREQUENCY_HZ;
    r.derived("max_rel_deviation_above_1mhz", format!("{:.5}", n.max_relative_deviation(f_mod)));
    r.derived("within_accuracy_above_1mhz", n.within_accuracy(f_mod));
    r.line("accuracy", n.accuracy, Source::Reference);

    Ok(vec![
        Output::text("spectrum_report.txt", r.text),
        Output::text("spectrum.csv", run.to_csv()),
        Output::text("spectrum_normalized.csv", n.to_csv()),
    ])
}

pub fn cmd_stokes(cfg: &ScenarioConfig) -> Result<Vec<Output>> {
    let sc = &cfg.stokes;
    let seed = cfg.seed.value;
    let alphabet = stokes::prepare_alphabet_with_lo(sc.displacement.value, sc.lo_photon_number.value)?;
    let channel = ChannelParams::new(sc.transmittance.value, sc.excess_noise.value)?;
    let per_state = sc.n_shots.value / 2;

    let mut before = Vec::with_capacity(2);
    let mut after = Vec::with_capacity(2);
    for (k, state) in alphabet.iter().enumerate() {
        let k = k as u64;
        before.push(measure_s2_stream(state, per_state, seed, k)?);
        let received = apply_channel(state, &channel)?;
        after.push(measure_s2_stream(&received, per_state, seed, 2 + k)?);
    }
    // residuals about each state's own mean, pooled over the alphabet
    let residuals = |sets: &[Vec<f64>]| -> Vec<f64> {
        sets.iter()
            .flat_map(|s| {
                let m = stokes::mean(s);
                s.iter().map(move |v| v - m)
            })
            .collect()
    };
    let est = excess_noise_estimate(&residuals(&before), &residuals(&after), &sc.bootstrap)?;

    let mut r = Report::default();
    header(&mut r, cfg, Command::Stokes);
    r.param("displacement_snu", &sc.displacement);
    r.param("lo_photon_number", &sc.lo_photon_number);
    r.param("transmittance", &sc.transmittance);
    r.param("excess_noise_snu", &sc.excess_noise);
    r.param("n_shots", &sc.n_shots);
    r.line("bootstrap_resamples", sc.bootstrap.resamples, cfg.source("stokes.bootstrap_resamples"));
    r.line("confidence", sc.bootstrap.confidence, cfg.source("stokes.confidence"));
    r.derived("signal_photon_number", format!("{:.6}", alphabet[0].signal_photon_number()));
    for (label, sets) in [("before", &before), ("after", &after)] {
        for (k, s) in sets.iter().enumerate() {
            let sign = if k == 0 { "plus" } else { "minus" };
            r.derived(&format!("{label}_{sign}_mean_snu"), format!("{:.6}", stokes::mean(s)));
            r.derived(&format!("{label}_{sign}_variance_snu"), format!("{:.6}", stokes::variance(s)));
        }
    }
    r.derived("epsilon_hat_snu", format!("{:.6}", est.epsilon));
    r.derived("epsilon_ci_low_snu", format!("{:.6}", est.ci_low));
    r.derived("epsilon_ci_high_snu", format!("{:.6}", est.ci_high));
    let received = apply_channel(&alphabet[0], &channel)?;
    r.derived(
        "error_rate_before",
        format!("{:.6e}", stokes::discrimination_error(sc.displacement.value, 1.0)?),
    );
    r.derived(
        "error_rate_after",
        format!(
            "{:.6e}",
            stokes::discrimination_error(received.s2_displacement(), received.variance())?
        ),
    );

    let outcomes_csv = |sets: &[Vec<f64>]| {
        let mut out = String::from("index,state,s2_snu\n");
        let mut i = 0;
        for (k, s) in sets.iter().enumerate() {
            let sign = if k == 0 { '+' } else { '-' };
            for v in s {
                let _ = writeln!(out, "{i},{sign},{v:.9e}");
                i += 1;
            }
        }
        out
    };
    let all_before: Vec<f64> = before.concat();
    let all_after: Vec<f64> = after.concat();
    let span = all_before
        .iter()
        .chain(&all_after)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let span = (span * 1.0001).max(1e-9);
    let hb = stokes::histogram(&all_before, -span, span, sc.histogram_bins)?;
    let ha = stokes::histogram(&all_after, -span, span, sc.histogram_bins)?;
    let mut hist = String::from("s2_snu,before_count,after_count\n");
    for ((c, nb), (_, na)) in hb.iter().zip(&ha) {
        let _ = writeln!(hist, "{c:.6},{nb},{na}");
    }

    Ok(vec![
        Output::text("stokes_report.txt", r.text),
        Output::text("stokes_before.csv", outcomes_csv(&before)),
        Output::text("stokes_after.csv", outcomes_csv(&after)),
        Output::text("stokes_histogram.csv", hist),
    ])
}

pub fn cmd_profile(cfg: &ScenarioConfig) -> Result<Vec<Output>> {
    let pc = &cfg.profile;
    let mut r = Report::default();
    header(&mut r, cfg, Command::Profile);
    let mut outputs = Vec::new();

    let seq = match &pc.input_dir {
        Some(dir) => {
            r.line("input", "files", Source::Config);
            profile::load_sequence(dir, pc.frame_rate.value)?
        }
        None => {
            r.line("input", "synthetic", Source::Default);
            let spec = JitterSpec::new(cfg.std_x.value, cfg.std_y.value, pc.frame_rate.value, 0.0)?;
            let centers = sample_centers(&spec, pc.frames.value, cfg.seed.value)?;
            let beam = GaussianBeam::unit(cfg.beam_diameter.value)?;
            let params = SynthesisParams {
                noise: pc.noise_rel_peak.value * beam.peak_intensity(),
                pedestal: None,
                distortion: pc.distortion,
            };
            r.param("frames", &pc.frames);
            r.param("beam_diameter_mm", &cfg.beam_diameter);
            r.param("jitter_std_x_mm", &cfg.std_x);
            r.param("jitter_std_y_mm", &cfg.std_y);
            r.param("noise_rel_peak", &pc.noise_rel_peak);
            r.line(
                "distortion",
                match pc.distortion {
                    profile::Distortion::None => "none",
                    profile::Distortion::Hatch => "hatch",
                },
                cfg.source("profile.distortion"),
            );
            r.line("width_px", pc.geometry.width, cfg.source("profile.width_px"));
            r.line("height_px", pc.geometry.height, cfg.source("profile.height_px"));
            r.line("pixel_pitch_mm", pc.geometry.pixel_pitch, cfg.source("profile.pixel_pitch_mm"));
            r.line("exposure_s", pc.geometry.exposure, cfg.source("profile.exposure_s"));
            let seq = synthesize_sequence(&beam, &centers, &pc.geometry, &params, cfg.seed.value)?;
            if pc.write_frames {
                for (i, f) in seq.frames().iter().enumerate() {
                    let (pgm, sidecar) = profile::encode_pgm(f);
                    outputs.push(Output {
                        path: PathBuf::from(format!("frames/frame_{i:05}.pgm")),
                        contents: pgm,
                    });
                    outputs.push(Output::text(format!("frames/frame_{i:05}.hdr"), sidecar));
                }
            }
            seq
        }
    };
    r.param("frame_rate_hz", &pc.frame_rate);
    r.line(
        "background",
        match pc.background {
            profile::Background::None => "none",
            profile::Background::BorderMedian => "border_median",
            profile::Background::LowestDecileMedian => "lowest_decile_median",
        },
        cfg.source("profile.background"),
    );
    let a = analyze_sequence(&seq, pc.background)?;
    r.derived("frames_analyzed", seq.len());
    r.sci("mean_cx_mm", a.stats.mean.x);
    r.sci("mean_cy_mm", a.stats.mean.y);
    r.sci("std_x_mm", a.stats.std_x);
    r.sci("std_y_mm", a.stats.std_y);
    r.sci("mean_radial_std_mm", a.stats.mean_radial_std);
    r.sci("mean_d4sigma_x_mm", a.mean_diameter.0);
    r.sci("mean_d4sigma_y_mm", a.mean_diameter.1);
    r.sci("d4sigma_std_mm", a.diameter_std());

    let mut centers = String::from("index,x_mm,y_mm\n");
    for (i, p) in a.shifted.iter().enumerate() {
        let _ = writeln!(centers, "{i},{:.9e},{:.9e}", p.x, p.y);
    }
    let mut all = vec![
        Output::text("profile_report.txt", r.text),
        Output::text("profile_frames.csv", a.to_csv()),
        Output::text("profile_centers.csv", centers),
    ];
    all.extend(outputs);
    Ok(all)
}

pub fn run_config(command: Command, cfg: &ScenarioConfig) -> Result<Vec<Output>> {
    match command {
        Command::Budget => cmd_budget(cfg),
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Stokes => cmd_stokes(cfg),
        Command::Profile => cmd_profile(cfg),
    }
}

/// Runs `command`, once per sweep value when a sweep is given. Budget sweeps
/// are collected into one table; other commands write each point into its
/// own subdirectory.
pub fn run(command: Command, raw: &RawConfig, sweep: Option<&Sweep>) -> Result<Vec<Output>> {
    let Some(sweep) = sweep else {
        return run_config(command, &ScenarioConfig::from_raw(raw)?);
    };
    let mut configs = Vec::with_capacity(sweep.values.len());
    for v in &sweep.values {
        let mut point = raw.clone();
        point.set_dotted(&sweep.key, &format_value(*v), Source::CommandLine)?;
        configs.push(ScenarioConfig::from_raw(&point)?);
    }
    if command == Command::Budget {
        let mut csv = format!("{},{}\n", sweep.key, NoiseReport::CSV_HEADER);
        for (v, cfg) in sweep.values.iter().zip(&configs) {
            let rin_value = rin(cfg, &cfg.beam()?)?;
            let report = NoiseReport::new(&cfg.budget_inputs()?, rin_value)?;
            let _ = writeln!(csv, "{},{}", format_value(*v), report.to_csv_row());
        }
        let mut r = Report::default();
        header(&mut r, &configs[0], command);
        r.line("sweep_key", &sweep.key, Source::CommandLine);
        r.line("sweep_points", sweep.values.len(), Source::CommandLine);
        r.line("estimator", configs[0].estimator.value.name(), configs[0].estimator.source);
        return Ok(vec![
            Output::text("budget_report.txt", r.text),
            Output::text("budget_sweep.csv", csv),
        ]);
    }
    let mut outputs = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let dir = format!("sweep_{i:03}");
        outputs.extend(run_config(command, cfg)?.into_iter().map(|o| o.nested(&dir)));
    }
    Ok(outputs)
}

/// Writes every output under `dir` atomically.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<()> {
    for o in outputs {
        crate::io::write_atomic(&dir.join(&o.path), &o.contents)?;
    }
    Ok(())
}
