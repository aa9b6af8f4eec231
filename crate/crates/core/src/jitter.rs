//! Beam-center wander: stochastic model, presets and sample statistics.

use std::fmt;
use std::str::FromStr;

use crate::beam::{GaussianBeam, Point};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::reference;
use crate::rng::{self, Domain};

/// Temporal structure of the center wander.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Correlation {
    /// Independent draws per frame.
    #[default]
    Independent,
    /// First-order autoregressive process with the given -3 dB knee (Hz).
    FirstOrder { knee_hz: f64 },
}

/// Gaussian beam-center fluctuation plus a static offset along +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterSpec {
    pub std_x: f64,
    pub std_y: f64,
    pub sample_rate: f64,
    pub misalignment: f64,
    pub correlation: Correlation,
}

impl JitterSpec {
    pub fn isotropic(std: f64, misalignment: f64) -> Result<Self> {
        Self::new(std, std, reference::CAMERA_RATE_HZ, misalignment)
    }

    pub fn new(std_x: f64, std_y: f64, sample_rate: f64, misalignment: f64) -> Result<Self> {
        let spec = Self {
            std_x,
            std_y,
            sample_rate,
            misalignment,
            correlation: Correlation::Independent,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_correlation(mut self, correlation: Correlation) -> Result<Self> {
        self.correlation = correlation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("jitter.std_x", self.std_x)?;
        ensure_non_negative("jitter.std_y", self.std_y)?;
        ensure_positive("jitter.sample_rate", self.sample_rate)?;
        ensure_non_negative("jitter.misalignment", self.misalignment)?;
        if let Correlation::FirstOrder { knee_hz } = self.correlation {
            ensure_positive("jitter.knee_hz", knee_hz)?;
        }
        Ok(())
    }

    /// Radial jitter scale used by the two-point estimator: `(std_x + std_y) / 2`.
    pub fn radial_std(&self) -> f64 {
        0.5 * (self.std_x + self.std_y)
    }

    /// Offset vector of the static misalignment.
    pub fn offset(&self) -> Point {
        Point::new(self.misalignment, 0.0)
    }

    /// Lag-one coefficient of the AR(1) process; 0 for independent draws.
    pub fn ar_coefficient(&self) -> f64 {
        match self.correlation {
            Correlation::Independent => 0.0,
            Correlation::FirstOrder { knee_hz } => {
                (-2.0 * std::f64::consts::PI * knee_hz / self.sample_rate).exp()
            }
        }
    }

    /// One-sided power spectral density of a unit-variance realization of
    /// this process at `freq` (1/Hz). Integrates to one over `[0, fs/2]`.
    pub fn unit_psd(&self, freq: f64) -> f64 {
        let fs = self.sample_rate;
        let a = self.ar_coefficient();
        let phase = 2.0 * std::f64::consts::PI * freq / fs;
        let denom = 1.0 - 2.0 * a * phase.cos() + a * a;
        2.0 * (1.0 - a * a) / (fs * denom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterSeries {
    points: Vec<Point>,
    sample_rate: f64,
}

impl CenterSeries {
    pub fn new(points: Vec<Point>, sample_rate: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooShort {
                required: 1,
                actual: 0,
            });
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid("centers", format!("non-finite sample at index {i}")));
        }
        ensure_positive("sample_rate", sample_rate)?;
        Ok(Self {
            points,
            sample_rate,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Centers with their mean subtracted, for plotting.
    pub fn mean_shifted(&self) -> Vec<Point> {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        let mean = Point::new(sx / n, sy / n);
        self.points
            .iter()
            .map(|p| Point::new(p.x - mean.x, p.y - mean.y))
            .collect()
    }

    /// Two-column CSV with header `x_mm,y_mm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_mm,y_mm\n");
        for p in &self.points {
            out.push_str(&format!("{:.9e},{:.9e}\n", p.x, p.y));
        }
        out
    }
}

/// Draws `n` beam centers. Deterministic in `(spec, n, seed)`; each index's
/// innovations come from its own counter-addressed stream.
pub fn sample_centers(spec: &JitterSpec, n: usize, seed: u64) -> Result<CenterSeries> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let xs = rng::standard_normals(seed, Domain::JitterX, 0, n);
    let ys = rng::standard_normals(seed, Domain::JitterY, 0, n);
    let xs = shape(&xs, spec.std_x, spec.ar_coefficient());
    let ys = shape(&ys, spec.std_y, spec.ar_coefficient());
    let offset = spec.offset();
    let points = xs
        .into_iter()
        .zip(ys)
        .map(|(x, y)| Point::new(x + offset.x, y + offset.y))
        .collect();
    CenterSeries::new(points, spec.sample_rate)
}

/// Scales standard normals to `std`, applying a stationary AR(1) filter when
/// `a > 0`.
fn shape(innovations: &[f64], std: f64, a: f64) -> Vec<f64> {
    if a == 0.0 {
        return innovations.iter().map(|z| std * z).collect();
    }
    let gain = std * (1.0 - a * a).sqrt();
    let mut out = Vec::with_capacity(innovations.len());
    let mut state = std * innovations[0];
    out.push(state);
    for z in &innovations[1..] {
        state = a * state + gain * z;
        out.push(state);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterStats {
    pub mean: Point,
    pub std_x: f64,
    pub std_y: f64,
    pub mean_radial_std: f64,
}

/// Per-axis mean and sample standard deviation (n − 1 denominator).
pub fn center_stats(series: &CenterSeries) -> Result<CenterStats> {
    let pts = series.points();
    if pts.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let mean = Point::new(sx / n, sy / n);
    let (vx, vy) = pts.iter().fold((0.0, 0.0), |(vx, vy), p| {
        (vx + (p.x - mean.x).powi(2), vy + (p.y - mean.y).powi(2))
    });
    let std_x = (vx / (n - 1.0)).sqrt();
    let std_y = (vy / (n - 1.0)).sqrt();
    Ok(CenterStats {
        mean,
        std_x,
        std_y,
        mean_radial_std: 0.5 * (std_x + std_y),
    })
}

/// Measurement conditions with preset beam and jitter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Table,
    AtmosphereFocussed,
    AtmosphereUnfocussed,
    HatchOpen,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Table,
        Scenario::AtmosphereFocussed,
        Scenario::AtmosphereUnfocussed,
        Scenario::HatchOpen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Table => "table",
            Scenario::AtmosphereFocussed => "atmosphere_focussed",
            Scenario::AtmosphereUnfocussed => "atmosphere_unfocussed",
            Scenario::HatchOpen => "hatch_open",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scenario `{s}` (expected one of table, atmosphere_focussed, atmosphere_unfocussed, hatch_open)"
                ))
            })
    }
}

/// Tunable multipliers for the presets that have no measured jitter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetKnobs {
    /// Wander std on the optical table (mm).
    pub table_std: f64,
    /// Unfocussed wander as a multiple of the focussed value.
    pub unfocussed_factor: f64,
    /// Broadened beam diameter of the unfocussed detection (mm).
    pub unfocussed_diameter: f64,
    /// Hatch-open wander as a multiple of the focussed value.
    pub hatch_factor: f64,
}

impl Default for PresetKnobs {
    fn default() -> Self {
        Self {
            table_std: 0.002,
            unfocussed_factor: 1.3,
            // with the 1.3 factor this places the two-point noise near 4.4e-7
            unfocussed_diameter: 1.06,
            hatch_factor: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioPreset {
    pub scenario: Scenario,
    pub jitter: JitterSpec,
    pub beam: GaussianBeam,
}

impl ScenarioPreset {
    pub fn new(scenario: Scenario, knobs: &PresetKnobs) -> Result<Self> {
        let focussed = reference::JITTER_STD_MM;
        let (std, diameter) = match scenario {
            Scenario::Table => (knobs.table_std, reference::BEAM_DIAMETER_MM),
            Scenario::AtmosphereFocussed => (focussed, reference::BEAM_DIAMETER_MM),
            Scenario::AtmosphereUnfocussed => {
                (focussed * knobs.unfocussed_factor, knobs.unfocussed_diameter)
            }
            Scenario::HatchOpen => (focussed * knobs.hatch_factor, reference::BEAM_DIAMETER_MM),
        };
        Ok(Self {
            scenario,
            jitter: JitterSpec::isotropic(std, reference::MISALIGNMENT_MM)?,
            beam: GaussianBeam::new(
                reference::OPTICAL_POWER_W,
                diameter,
                Point::ORIGIN,
            )?,
        })
    }

    /// Whether the jitter std of this preset is a measured value.
    pub fn jitter_is_measured(&self) -> bool {
        self.scenario == Scenario::AtmosphereFocussed
    }

    /// Whether the beam diameter of this preset is a measured value.
    pub fn diameter_is_measured(&self) -> bool {
        self.scenario != Scenario::AtmosphereUnfocussed
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_spec_gives_origin() {
        let spec = JitterSpec::isotropic(0.0, 0.0).unwrap();
        let s = sample_centers(&spec, 650, 1).unwrap();
        assert_eq!(s.len(), 650);
        assert!(s.points().iter().all(|p| *p == Point::ORIGIN));
    }

    #[test]
    fn zero_samples_rejected() {
        let spec = JitterSpec::isotropic(0.01, 0.0).unwrap();
        assert!(sample_centers(&spec, 0, 1).is_err());
    }

    #[test]
    fn large_sample_recovers_std() {
        let spec = JitterSpec::isotropic(0.0134, 0.0).unwrap();
        let s = sample_centers(&spec, 100_000, 42).unwrap();
        let st = center_stats(&s).unwrap();
        assert!((st.std_x / 0.0134 - 1.0).abs() < 0.01, "{}", st.std_x);
        assert!((st.std_y / 0.0134 - 1.0).abs() < 0.01, "{}", st.std_y);
    }

    #[test]
    fn repeat_runs_identical() {
        let spec = JitterSpec::isotropic(0.0134, 0.2).unwrap();
        assert_eq!(
            sample_centers(&spec, 9000, 5).unwrap(),
            sample_centers(&spec, 9000, 5).unwrap()
        );
    }

    #[test]
    fn misalignment_along_plus_x() {
        let spec = JitterSpec::isotropic(0.0, 0.2).unwrap();
        let s = sample_centers(&spec, 3, 0).unwrap();
        assert!(s.points().iter().all(|p| *p == Point::new(0.2, 0.0)));
    }

    #[test]
    fn constant_series_zero_std() {
        let s = CenterSeries::new(vec![Point::new(1.0, -2.0); 10], 1.0).unwrap();
        let st = center_stats(&s).unwrap();
        assert_eq!((st.std_x, st.std_y), (0.0, 0.0));
        assert_eq!(st.mean, Point::new(1.0, -2.0));
    }

    #[test]
    fn two_point_series_uses_bessel_correction() {
        let s = CenterSeries::new(vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0)], 1.0).unwrap();
        let st = center_stats(&s).unwrap();
        assert_eq!(st.mean, Point::new(1.0, 0.0));
        // sqrt(((0-1)² + (2-1)²) / (2-1))
        assert!((st.std_x - 2f64.sqrt()).abs() < 1e-15);
        assert!((st.mean_radial_std - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn short_series_rejected() {
        let s = CenterSeries::new(vec![Point::ORIGIN], 1.0).unwrap();
        assert!(matches!(center_stats(&s), Err(Error::TooShort { .. })));
        assert!(CenterSeries::new(vec![], 1.0).is_err());
        assert!(CenterSeries::new(vec![Point::new(f64::NAN, 0.0)], 1.0).is_err());
    }

    #[test]
    fn estimator_at_frame_count() {
        let spec = JitterSpec::isotropic(0.0134, 0.0).unwrap();
        let s = sample_centers(&spec, 650, 11).unwrap();
        let st = center_stats(&s).unwrap();
        assert!((st.mean_radial_std / 0.0134 - 1.0).abs() < 0.05);
    }

    #[test]
    fn ar1_keeps_marginal_std_and_correlates() {
        let spec = JitterSpec::new(0.01, 0.01, 1e6, 0.0)
            .unwrap()
            .with_correlation(Correlation::FirstOrder { knee_hz: 1e3 })
            .unwrap();
        let s = sample_centers(&spec, 200_000, 3).unwrap();
        let st = center_stats(&s).unwrap();
        assert!((st.std_x / 0.01 - 1.0).abs() < 0.1, "{}", st.std_x);
        let xs: Vec<f64> = s.points().iter().map(|p| p.x).collect();
        let lag1: f64 = xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>()
            / xs.iter().map(|x| x * x).sum::<f64>();
        assert!((lag1 - spec.ar_coefficient()).abs() < 0.01);
    }

    #[test]
    fn unit_psd_integrates_to_one() {
        let spec = JitterSpec::new(1.0, 1.0, 1e5, 0.0)
            .unwrap()
            .with_correlation(Correlation::FirstOrder { knee_hz: 2e3 })
            .unwrap();
        let n = 200_000;
        let df = 0.5 * spec.sample_rate / n as f64;
        let total: f64 = (0..n).map(|i| spec.unit_psd((i as f64 + 0.5) * df) * df).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("roof".parse::<Scenario>().is_err());
    }

    #[test]
    fn presets_order_by_jitter() {
        let k = PresetKnobs::default();
        let std = |sc| ScenarioPreset::new(sc, &k).unwrap().jitter.std_x;
        assert!(std(Scenario::Table) < std(Scenario::AtmosphereFocussed));
        assert!(std(Scenario::AtmosphereFocussed) < std(Scenario::AtmosphereUnfocussed));
        assert!(std(Scenario::AtmosphereUnfocussed) < std(Scenario::HatchOpen));
        assert_eq!(std(Scenario::AtmosphereFocussed), 0.0134);
    }
}
