//! Spectrum-analyzer emulation for detected-intensity time series.
//!
//! RBW is the periodogram bin width (segment length `fs / rbw`, Hann window,
//! 50 % overlap). VBW is emulated by averaging `ceil(rbw / vbw)` segment
//! periodograms per trace, which gives the trace the variance reduction of a
//! video filter with that noise bandwidth.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::beam::{CircularAperture, Point, RadialFractionTable, DEFAULT_TOLERANCE};
use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::jitter::{sample_centers, Correlation, JitterSpec, ScenarioPreset};
use crate::reference;
use crate::rng::{self, Domain};

/// Knee of the AR(1) jitter process used for spectra when none is configured (Hz).
pub const DEFAULT_KNEE_HZ: f64 = 10e3;
/// Frequency at which jitter and shot noise are compared (Hz).
pub const DEFAULT_SHOT_REFERENCE_HZ: f64 = reference::CAMERA_RATE_HZ;

/// Ratio of the simulated sample rate to the stop frequency.
pub const OVERSAMPLING: f64 = 2.56;

/// Segments folded per parallel work unit. Fixed so the summation order does
/// not depend on the thread count.
const SEGMENT_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub rbw: f64,
    pub vbw: f64,
    pub n_points: usize,
    pub f_start: f64,
    pub f_stop: f64,
    /// Traces averaged on top of the VBW smoothing.
    pub traces: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            rbw: reference::RESOLUTION_BANDWIDTH_HZ,
            vbw: reference::VIDEO_BANDWIDTH_HZ,
            n_points: reference::TRACE_POINTS,
            f_start: reference::LOWEST_TRACE_FREQUENCY_HZ,
            f_stop: 2.5e6,
            traces: 10,
        }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("rbw", self.rbw)?;
        ensure_positive("vbw", self.vbw)?;
        if self.vbw > self.rbw {
            return Err(Error::invalid("vbw", "must not exceed rbw"));
        }
        if self.n_points < 2 {
            return Err(Error::invalid("n_points", "need at least 2 points"));
        }
        ensure_non_negative("f_start", self.f_start)?;
        ensure_finite("f_stop", self.f_stop)?;
        if !(self.f_start < self.f_stop) {
            return Err(Error::invalid("f_stop", "must exceed f_start"));
        }
        if self.traces == 0 {
            return Err(Error::invalid("traces", "must be >= 1"));
        }
        Ok(())
    }

    /// Segment periodograms averaged per trace.
    pub fn segments(&self) -> usize {
        (self.rbw / self.vbw).ceil() as usize * self.traces
    }

    /// Segment length in samples at `sample_rate`.
    pub fn segment_len(&self, sample_rate: f64) -> usize {
        (sample_rate / self.rbw).round() as usize
    }

    /// Samples needed to produce one spectrum at `sample_rate`.
    pub fn required_samples(&self, sample_rate: f64) -> usize {
        let len = self.segment_len(sample_rate);
        let hop = len / 2;
        len + hop * (self.segments() - 1)
    }

    /// Digitizer rate for this span: `OVERSAMPLING · f_stop` rounded up to a
    /// multiple of the RBW, which keeps the top of the span off the Nyquist
    /// bin.
    pub fn sample_rate(&self) -> f64 {
        (OVERSAMPLING * self.f_stop / self.rbw).ceil() * self.rbw
    }

    pub fn frequencies(&self) -> Vec<f64> {
        crate::budget::linspace(self.f_start, self.f_stop, self.n_points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub sample_rate: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, sample_rate: f64) -> Result<Self> {
        ensure_positive("sample_rate", sample_rate)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite sample {v}")));
        }
        Ok(Self {
            values,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }
}

/// Averaged one-sided periodogram on the native FFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Bin spacing (Hz).
    pub resolution: f64,
    /// Power spectral density per bin, bins `0..=len/2` (units²/Hz).
    pub density: Vec<f64>,
    pub segments: usize,
}

impl Periodogram {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    /// Integral of the density over `[0, fs/2]`.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution
    }
}

/// Welch estimate from the first `segments` Hann-windowed segments of length
/// `segment_len` at 50 % overlap. The mean of the analysed span is removed
/// first.
pub fn welch(series: &TimeSeries, segment_len: usize, segments: usize) -> Result<Periodogram> {
    if segment_len < 8 {
        return Err(Error::invalid("segment_len", "need at least 8 samples per segment"));
    }
    if segments == 0 {
        return Err(Error::invalid("segments", "must be >= 1"));
    }
    let hop = segment_len / 2;
    let required = segment_len + hop * (segments - 1);
    if series.len() < required {
        return Err(Error::TooShort {
            required,
            actual: series.len(),
        });
    }
    let window: Vec<f64> = (0..segment_len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / segment_len as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mean = series.values[..required].iter().sum::<f64>() / required as f64;

    let chunk_sums: Vec<Vec<f64>> = (0..segments)
        .collect::<Vec<_>>()
        .par_chunks(SEGMENT_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; bins];
            let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
            let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for &s in chunk {
                let seg = &series.values[s * hop..s * hop + segment_len];
                for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
                    *b = Complex::new((x - mean) * w, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, c) in acc.iter_mut().zip(&buf) {
                    *a += c.norm_sqr();
                }
            }
            acc
        })
        .collect();

    let mut total = vec![0.0; bins];
    for chunk in &chunk_sums {
        for (t, v) in total.iter_mut().zip(chunk) {
            *t += v;
        }
    }
    let scale = 1.0 / (series.sample_rate * window_power * segments as f64);
    let nyquist = if segment_len.is_multiple_of(2) { bins - 1 } else { usize::MAX };
    let density = total
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || k == nyquist { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    Ok(Periodogram {
        resolution: series.sample_rate / segment_len as f64,
        density,
        segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumScale {
    /// dB relative to one unit²/Hz.
    Absolute,
    /// dB relative to the quantum-noise-limited reference.
    RelativeToQnl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub power_db: Vec<f64>,
    /// Fractional uncertainty of the trace.
    pub accuracy: f64,
    pub scale: SpectrumScale,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Largest `|10^(dB/10) − 1|` among points at or above `f_min`.
    pub fn max_relative_deviation(&self, f_min: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.power_db)
            .filter(|(f, _)| **f >= f_min)
            .map(|(_, db)| (10f64.powf(db / 10.0) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Whether every point at or above `f_min` lies within the accuracy band
    /// around 0 dB.
    pub fn within_accuracy(&self, f_min: f64) -> bool {
        self.max_relative_deviation(f_min) <= self.accuracy
    }

    /// Mean of the first `n` trace values in dB.
    pub fn low_end_db(&self, n: usize) -> f64 {
        let n = n.clamp(1, self.len());
        self.power_db[..n].iter().sum::<f64>() / n as f64
    }

    pub fn csv_header(&self) -> &'static str {
        match self.scale {
            SpectrumScale::Absolute => "frequency_hz,power_db",
            SpectrumScale::RelativeToQnl => "frequency_hz,power_db_rel_qnl",
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(40 * (self.len() + 1));
        out.push_str(self.csv_header());
        out.push('\n');
        for (f, p) in self.frequencies.iter().zip(&self.power_db) {
            out.push_str(&format!("{f:.3},{p:.6}\n"));
        }
        out
    }
}

/// Analyzer trace of `series` in absolute units.
pub fn psd(series: &TimeSeries, config: &SpectrumConfig) -> Result<Spectrum> {
    config.validate()?;
    let fs = series.sample_rate;
    if config.f_stop > 0.5 * fs {
        return Err(Error::invalid(
            "f_stop",
            format!("{} Hz exceeds the Nyquist frequency {} Hz", config.f_stop, 0.5 * fs),
        ));
    }
    let pg = welch(series, config.segment_len(fs), config.segments())?;
    let freqs = config.frequencies();
    let spacing = (config.f_stop - config.f_start) / (config.n_points - 1) as f64;
    let power_db = freqs
        .iter()
        .map(|&f| {
            let value = trace_value(&pg, f, spacing);
            10.0 * value.max(f64::MIN_POSITIVE).log10()
        })
        .collect();
    Ok(Spectrum {
        frequencies: freqs,
        power_db,
        accuracy: reference::TRACE_ACCURACY,
        scale: SpectrumScale::Absolute,
    })
}

/// Mean of the bins centred within half a point spacing of `f`, or the linear
/// interpolation between the neighbouring bins when none is.
fn trace_value(pg: &Periodogram, f: f64, spacing: f64) -> f64 {
    let last = pg.density.len() - 1;
    let lo = ((f - 0.5 * spacing) / pg.resolution).ceil().max(0.0) as usize;
    let hi = (((f + 0.5 * spacing) / pg.resolution).ceil() as usize).min(last + 1);
    if hi > lo {
        let bins = &pg.density[lo..hi];
        return bins.iter().sum::<f64>() / bins.len() as f64;
    }
    let t = (f / pg.resolution).clamp(0.0, last as f64);
    let k = (t.floor() as usize).min(last.saturating_sub(1));
    let u = t - k as f64;
    pg.density[k] * (1.0 - u) + pg.density[(k + 1).min(last)] * u
}

/// Pointwise dB difference of two absolute traces on the same grid.
pub fn normalize_to_qnl(signal: &Spectrum, reference: &Spectrum) -> Result<Spectrum> {
    if signal.scale != SpectrumScale::Absolute || reference.scale != SpectrumScale::Absolute {
        return Err(Error::GridMismatch("both traces must be in absolute units".into()));
    }
    if signal.frequencies != reference.frequencies {
        return Err(Error::GridMismatch(format!(
            "signal has {} points, reference {} (or different frequencies)",
            signal.len(),
            reference.len()
        )));
    }
    Ok(Spectrum {
        frequencies: signal.frequencies.clone(),
        power_db: signal
            .power_db
            .iter()
            .zip(&reference.power_db)
            .map(|(s, r)| s - r)
            .collect(),
        accuracy: signal.accuracy.max(reference.accuracy),
        scale: SpectrumScale::RelativeToQnl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Electronic floor below shot noise (dB, positive means below).
    /// `f64::INFINITY` disables the floor.
    pub electronic_noise_db_below_qnl: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            electronic_noise_db_below_qnl: 10.0,
        }
    }
}

impl DetectorModel {
    pub const NOISELESS: DetectorModel = DetectorModel {
        electronic_noise_db_below_qnl: f64::INFINITY,
    };

    pub fn validate(&self) -> Result<()> {
        let db = self.electronic_noise_db_below_qnl;
        if db.is_nan() || db <= 0.0 {
            return Err(Error::invalid(
                "electronic_noise_db_below_qnl",
                "must be positive (floor below shot noise)",
            ));
        }
        Ok(())
    }

    /// Electronic-noise amplitude relative to the shot-noise amplitude.
    pub fn amplitude_ratio(&self) -> f64 {
        10f64.powf(-self.electronic_noise_db_below_qnl / 20.0)
    }
}

/// Forward model of the detected photocurrent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotocurrentModel {
    pub beam_diameter: f64,
    pub aperture: CircularAperture,
    /// Jitter statistics; its sample rate is replaced by the simulation rate.
    pub jitter: JitterSpec,
    /// Relative shot noise over the bandwidth the jitter figures refer to.
    pub relative_shot_noise: f64,
    /// Frequency at which jitter and shot noise are compared (Hz).
    pub shot_reference_hz: f64,
    pub detector: DetectorModel,
    /// DC level of the photocurrent with the beam at its nominal position.
    pub mean_level: f64,
}

impl PhotocurrentModel {
    /// Model for a scenario preset with AR(1) jitter of the given knee.
    pub fn from_preset(
        preset: &ScenarioPreset,
        aperture: CircularAperture,
        relative_shot_noise: f64,
        knee_hz: f64,
    ) -> Result<Self> {
        Ok(Self {
            beam_diameter: preset.beam.diameter(),
            aperture,
            jitter: preset
                .jitter
                .with_correlation(Correlation::FirstOrder { knee_hz })?,
            relative_shot_noise,
            shot_reference_hz: DEFAULT_SHOT_REFERENCE_HZ,
            detector: DetectorModel::default(),
            mean_level: 1.0,
        })
    }

    /// The same detector and shot-noise level with a motionless beam.
    pub fn quantum_limited_reference(&self) -> Self {
        let mut r = *self;
        r.jitter.std_x = 0.0;
        r.jitter.std_y = 0.0;
        r
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("beam_diameter", self.beam_diameter)?;
        self.jitter.validate()?;
        ensure_non_negative("relative_shot_noise", self.relative_shot_noise)?;
        ensure_positive("shot_reference_hz", self.shot_reference_hz)?;
        ensure_positive("mean_level", self.mean_level)?;
        self.detector.validate()
    }

    /// Per-sample relative shot-noise std at `sample_rate`, chosen so that the
    /// shot-noise density equals `relative_shot_noise²` times the unit jitter
    /// density at the comparison frequency.
    pub fn shot_sample_std(&self, sample_rate: f64) -> Result<f64> {
        let spec = self.jitter_at(sample_rate)?;
        Ok(self.relative_shot_noise
            * (0.5 * sample_rate * spec.unit_psd(self.shot_reference_hz)).sqrt())
    }

    fn jitter_at(&self, sample_rate: f64) -> Result<JitterSpec> {
        let mut spec = self.jitter;
        spec.sample_rate = sample_rate;
        spec.validate()?;
        Ok(spec)
    }
}

/// Detected photocurrent over `duration` seconds at `sample_rate`.
///
/// The series is `mean_level · F(c_t) / F(c_nominal)` plus white shot noise
/// and an electronic floor, where `F` is the captured fraction for beam
/// center `c_t`. Shot and electronic noise draw from streams that depend only
/// on `seed`, so a reference run with the same seed shares them.
pub fn simulate_photocurrent(
    model: &PhotocurrentModel,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<TimeSeries> {
    model.validate()?;
    ensure_positive("duration", duration)?;
    ensure_positive("sample_rate", sample_rate)?;
    let n = (duration * sample_rate).round() as usize;
    if n < 2 {
        return Err(Error::invalid("duration", "yields fewer than 2 samples"));
    }
    let spec = model.jitter_at(sample_rate)?;
    let centers = sample_centers(&spec, n, seed)?;
    let ap = model.aperture.center();
    let dist: Vec<f64> = centers.points().iter().map(|p| p.distance(ap)).collect();
    let nominal = Point::new(
        spec.offset().x - ap.x,
        spec.offset().y - ap.y,
    )
    .distance(Point::ORIGIN);
    let (lo, hi) = dist
        .iter()
        .fold((nominal, nominal), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let table = RadialFractionTable::build(
        model.beam_diameter,
        model.aperture.diameter(),
        lo,
        hi,
        512,
        DEFAULT_TOLERANCE,
    )?;
    let norm = model.mean_level / table.evaluate(nominal).0;

    let shot_std = model.shot_sample_std(sample_rate)? * model.mean_level;
    let elec_std = shot_std * model.detector.amplitude_ratio();
    let shot = rng::standard_normals(seed, Domain::ShotNoise, 0, n);
    let elec = rng::standard_normals(seed, Domain::ElectronicNoise, 0, n);

    let values = dist
        .par_iter()
        .zip(shot.par_iter().zip(elec.par_iter()))
        .map(|(&d, (&zs, &ze))| norm * table.evaluate(d).0 + shot_std * zs + elec_std * ze)
        .collect();
    TimeSeries::new(values, sample_rate)
}

/// Signal, reference and normalized traces of one spectrum run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRun {
    pub signal: Spectrum,
    pub reference: Spectrum,
    pub normalized: Spectrum,
}

impl SpectrumRun {
    pub const CSV_HEADER: &'static str =
        "frequency_hz,signal_db,reference_db,power_db_rel_qnl";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for i in 0..self.normalized.len() {
            out.push_str(&format!(
                "{:.3},{:.6},{:.6},{:.6}\n",
                self.normalized.frequencies[i],
                self.signal.power_db[i],
                self.reference.power_db[i],
                self.normalized.power_db[i]
            ));
        }
        out
    }
}

/// Simulates the signal and its quantum-limited reference with shared noise
/// streams and returns the three traces at [`SpectrumConfig::sample_rate`].
pub fn simulate_spectrum(
    model: &PhotocurrentModel,
    config: &SpectrumConfig,
    seed: u64,
) -> Result<SpectrumRun> {
    config.validate()?;
    let fs = config.sample_rate();
    let n = config.required_samples(fs);
    let duration = n as f64 / fs;
    let signal_series = simulate_photocurrent(model, duration, fs, seed)?;
    let reference_series =
        simulate_photocurrent(&model.quantum_limited_reference(), duration, fs, seed)?;
    let signal = psd(&signal_series, config)?;
    let reference = psd(&reference_series, config)?;
    let normalized = normalize_to_qnl(&signal, &reference)?;
    Ok(SpectrumRun {
        signal,
        reference,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jitter::{PresetKnobs, Scenario};

    fn white(n: usize, std: f64, fs: f64, seed: u64) -> TimeSeries {
        let v = rng::standard_normals(seed, Domain::ElectronicNoise, 7, n)
            .into_iter()
            .map(|z| std * z)
            .collect();
        TimeSeries::new(v, fs).unwrap()
    }

    fn flat_config() -> SpectrumConfig {
        SpectrumConfig {
            rbw: 10e3,
            vbw: 5.0,
            n_points: 101,
            f_start: 20e3,
            f_stop: 480e3,
            traces: 1,
        }
    }

    #[test]
    fn config_validation() {
        let base = SpectrumConfig::default();
        assert!(base.validate().is_ok());
        let broken = [
            SpectrumConfig { vbw: 2.0 * base.rbw, ..base },
            SpectrumConfig { n_points: 1, ..base },
            SpectrumConfig { f_stop: base.f_start, ..base },
            SpectrumConfig { traces: 0, ..base },
        ];
        for c in broken {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn white_noise_level_and_flatness() {
        let fs = 1e6;
        let cfg = flat_config();
        let s = white(cfg.required_samples(fs), 1.0, fs, 1);
        let spec = psd(&s, &cfg).unwrap();
        // unit variance over fs/2 → density 2/fs
        let expected = 10.0 * (2.0 / fs).log10();
        for db in &spec.power_db {
            assert!((db - expected).abs() < 0.25, "{db} vs {expected}");
        }
    }

    #[test]
    fn parseval() {
        let fs = 1e6;
        let s = white(200_000, 1.0, fs, 2);
        let pg = welch(&s, 100, 3999).unwrap();
        let r = pg.total_power() / s.variance();
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn sine_peak_bin() {
        let fs = 1e6;
        let f0 = 250e3;
        let n = 20_000;
        let v = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f0 * i as f64 / fs).sin())
            .collect();
        let pg = welch(&TimeSeries::new(v, fs).unwrap(), 100, 100).unwrap();
        let peak = pg
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(pg.frequency(peak), f0);
    }

    #[test]
    fn scaling_is_linear_in_power() {
        let fs = 1e6;
        let cfg = flat_config();
        let a = white(cfg.required_samples(fs), 1.0, fs, 3);
        let b = TimeSeries::new(a.values.iter().map(|v| v * 2f64.sqrt()).collect(), fs).unwrap();
        let n = normalize_to_qnl(&psd(&b, &cfg).unwrap(), &psd(&a, &cfg).unwrap()).unwrap();
        for db in &n.power_db {
            assert!((db - 3.0103).abs() < 1e-3);
        }
    }

    #[test]
    fn too_short_and_grid_mismatch() {
        let cfg = SpectrumConfig::default();
        let s = white(1000, 1.0, 10e6, 1);
        assert!(matches!(psd(&s, &cfg), Err(Error::TooShort { .. })));
        let s = white(1000, 1.0, 1e6, 1);
        assert!(psd(&s, &cfg).is_err());

        let fs = 1e6;
        let c1 = flat_config();
        let c2 = SpectrumConfig { n_points: 51, ..c1 };
        let s = white(c1.required_samples(fs), 1.0, fs, 1);
        let a = psd(&s, &c1).unwrap();
        let b = psd(&s, &c2).unwrap();
        assert!(matches!(normalize_to_qnl(&a, &b), Err(Error::GridMismatch(_))));
        let same = normalize_to_qnl(&a, &a).unwrap();
        assert!(same.power_db.iter().all(|&d| d == 0.0));
    }

    fn model(scenario: Scenario) -> PhotocurrentModel {
        let preset = ScenarioPreset::new(scenario, &PresetKnobs::default()).unwrap();
        PhotocurrentModel::from_preset(
            &preset,
            CircularAperture::centered(reference::PHOTODIODE_DIAMETER_MM).unwrap(),
            1.94e-7,
            DEFAULT_KNEE_HZ,
        )
        .unwrap()
    }

    #[test]
    fn motionless_noiseless_current_is_constant() {
        let mut m = model(Scenario::AtmosphereFocussed).quantum_limited_reference();
        m.relative_shot_noise = 0.0;
        m.detector = DetectorModel::NOISELESS;
        let s = simulate_photocurrent(&m, 1e-3, 1e6, 1).unwrap();
        assert!(s.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn motionless_current_is_white_at_prescribed_level() {
        let mut m = model(Scenario::AtmosphereFocussed).quantum_limited_reference();
        m.jitter.correlation = Correlation::Independent;
        m.detector = DetectorModel::NOISELESS;
        let s = simulate_photocurrent(&m, 0.2, 1e6, 5).unwrap();
        let rel = s.variance().sqrt() / s.mean();
        assert!((rel / 1.94e-7 - 1.0).abs() < 0.01, "{rel}");
    }

    #[test]
    fn hatch_open_is_noisier_than_focussed() {
        let a = simulate_photocurrent(&model(Scenario::AtmosphereFocussed), 0.02, 1e6, 9).unwrap();
        let b = simulate_photocurrent(&model(Scenario::HatchOpen), 0.02, 1e6, 9).unwrap();
        assert!(b.variance() > a.variance());
    }

    #[test]
    fn reference_against_itself_is_zero() {
        let m = model(Scenario::Table).quantum_limited_reference();
        let cfg = SpectrumConfig {
            f_stop: 500e3,
            ..SpectrumConfig::default()
        };
        let run = simulate_spectrum(&m, &cfg, 3).unwrap();
        assert!(run.normalized.power_db.iter().all(|&d| d == 0.0));
    }
}
