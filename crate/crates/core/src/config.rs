//! Scenario configuration files.
//!
//! INI sections mirror the library modules. Every physical quantity carries
//! its unit in the key name. Unknown sections or keys are rejected so typos
//! do not silently fall back to defaults.
//!
//! ```ini
//! [run]
//! seed = 7
//!
//! [scenario]
//! name = atmosphere_focussed
//!
//! [budget]
//! estimator = ensemble_rms
//! n_samples = 100000
//! ```

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::beam::{CircularAperture, GaussianBeam, Point, DEFAULT_TOLERANCE};
use crate::budget::{BudgetInputs, DiameterConvention, JitterEstimator};
use crate::error::{Error, Result};
use crate::jitter::{Correlation, JitterSpec, PresetKnobs, Scenario, ScenarioPreset};
use crate::profile::{Background, Distortion, FrameGeometry};
use crate::reference;
use crate::spectrum::{DetectorModel, SpectrumConfig, DEFAULT_KNEE_HZ, DEFAULT_SHOT_REFERENCE_HZ};
use crate::stokes::{BootstrapOptions, DEFAULT_LO_PHOTON_NUMBER};

/// Recognised `(section, keys)` pairs.
const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["seed", "out_dir"]),
    (
        "scenario",
        &["name", "table_std_mm", "unfocussed_factor", "unfocussed_diameter_mm", "hatch_factor"],
    ),
    ("beam", &["diameter_mm", "diameter_convention"]),
    ("aperture", &["diameter_mm"]),
    (
        "jitter",
        &["std_mm", "std_x_mm", "std_y_mm", "misalignment_mm", "sample_rate_hz", "knee_hz"],
    ),
    (
        "budget",
        &["power_uw", "wavelength_nm", "vbw_hz", "estimator", "n_samples", "tolerance"],
    ),
    (
        "fit",
        &[
            "enabled",
            "target",
            "rel_tol",
            "diameter_min_mm",
            "diameter_max_mm",
            "diameter_steps",
            "sigma_min_mm",
            "sigma_max_mm",
            "sigma_steps",
        ],
    ),
    (
        "spectrum",
        &["rbw_hz", "vbw_hz", "n_points", "f_start_hz", "f_stop_hz", "traces", "shot_reference_hz"],
    ),
    ("detector", &["electronic_noise_db_below_qnl"]),
    (
        "stokes",
        &[
            "displacement_snu",
            "transmittance",
            "excess_noise_snu",
            "n_shots",
            "lo_photon_number",
            "bootstrap_resamples",
            "confidence",
            "histogram_bins",
        ],
    ),
    (
        "profile",
        &[
            "input_dir",
            "frames",
            "width_px",
            "height_px",
            "pixel_pitch_mm",
            "exposure_s",
            "frame_rate_hz",
            "noise_rel_peak",
            "distortion",
            "background",
            "write_frames",
        ],
    ),
];

/// Where a configured value came from. Shown next to every report line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    /// Value of the reference rooftop measurement.
    Reference,
    /// Built-in modeling default.
    Default,
    /// Set in the config file.
    Config,
    /// Set on the command line (`--seed`, `--sweep`).
    CommandLine,
    /// Computed from other values.
    Derived,
}

impl Source {
    pub fn tag(self) -> &'static str {
        match self {
            Source::Reference => "reference",
            Source::Default => "default",
            Source::Config => "config",
            Source::CommandLine => "cli",
            Source::Derived => "derived",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Raw `section.key → value` pairs with their origin, before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), (String, Source)>,
    base_dir: Option<PathBuf>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut raw = RawConfig::default();
        for (section, props) in ini.iter() {
            let section = match section {
                Some(s) => s.trim().to_string(),
                None if props.is_empty() => continue,
                None => {
                    let key = props.iter().next().map(|(k, _)| k).unwrap_or_default();
                    return Err(Error::Config(format!("key `{key}` appears before any section")));
                }
            };
            for (key, value) in props.iter() {
                raw.set(&section, key.trim(), value.trim(), Source::Config)?;
            }
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        let mut raw = Self::parse(&text)?;
        raw.base_dir = path.parent().map(Path::to_path_buf);
        Ok(raw)
    }

    /// Sets `section.key`, validating it against the schema.
    pub fn set(&mut self, section: &str, key: &str, value: &str, source: Source) -> Result<()> {
        let keys = SCHEMA
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, k)| *k)
            .ok_or_else(|| Error::Config(format!("unknown section [{section}]")))?;
        if !keys.contains(&key) {
            return Err(Error::Config(format!(
                "unknown key `{key}` in [{section}] (expected one of: {})",
                keys.join(", ")
            )));
        }
        self.entries
            .insert((section.to_string(), key.to_string()), (value.to_string(), source));
        Ok(())
    }

    /// Sets a dotted `section.key`.
    pub fn set_dotted(&mut self, dotted: &str, value: &str, source: Source) -> Result<()> {
        let (section, key) = dotted
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("expected section.key, got `{dotted}`")))?;
        self.set(section, key, value, source)
    }

    fn get(&self, section: &str, key: &str) -> Option<&(String, Source)> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }
}

/// A typed value with its origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Param<T> {
    pub value: T,
    pub source: Source,
}

impl<T> Param<T> {
    pub fn new(value: T, source: Source) -> Self {
        Self { value, source }
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
    /// Origin of every key looked up, including defaults.
    seen: RefCell<BTreeMap<String, Source>>,
}

impl Reader<'_> {
    fn parse<T>(&self, section: &str, key: &str) -> Result<Option<Param<T>>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.raw.get(section, key) {
            None => Ok(None),
            Some((text, source)) => {
                self.seen.borrow_mut().insert(format!("{section}.{key}"), *source);
                text
                .parse::<T>()
                .map(|v| Some(Param::new(v, *source)))
                .map_err(|e| Error::Config(format!("[{section}] {key} = `{text}`: {e}")))
            }
        }
    }

    fn or<T>(&self, section: &str, key: &str, default: T, source: Source) -> Result<Param<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.parse(section, key)?.unwrap_or_else(|| {
            self.seen.borrow_mut().insert(format!("{section}.{key}"), source);
            Param::new(default, source)
        }))
    }

    fn flag(&self, section: &str, key: &str, default: bool) -> Result<Param<bool>> {
        match self.raw.get(section, key) {
            None => Ok(Param::new(default, Source::Default)),
            Some((text, source)) => {
                let v = match text.to_ascii_lowercase().as_str() {
                    "true" | "yes" | "on" | "1" => true,
                    "false" | "no" | "off" | "0" => false,
                    _ => {
                        return Err(Error::Config(format!(
                            "[{section}] {key} = `{text}` is not a boolean"
                        )))
                    }
                };
                Ok(Param::new(v, *source))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub target: Param<f64>,
    pub rel_tol: Param<f64>,
    pub diameters: (f64, f64, usize),
    pub sigmas: (f64, f64, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesConfig {
    pub displacement: Param<f64>,
    pub transmittance: Param<f64>,
    pub excess_noise: Param<f64>,
    pub n_shots: Param<usize>,
    pub lo_photon_number: Param<f64>,
    pub bootstrap: BootstrapOptions,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    /// Directory of recorded frames; synthetic frames are used when absent.
    pub input_dir: Option<PathBuf>,
    pub frames: Param<usize>,
    pub geometry: FrameGeometry,
    pub frame_rate: Param<f64>,
    /// Readout noise relative to the beam's peak intensity.
    pub noise_rel_peak: Param<f64>,
    pub distortion: Distortion,
    pub background: Background,
    pub write_frames: bool,
}

/// Fully typed scenario configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: Param<u64>,
    pub out_dir: Option<PathBuf>,
    pub scenario: Scenario,
    pub knobs: PresetKnobs,
    /// 1/e² beam diameter (mm), after any convention conversion.
    pub beam_diameter: Param<f64>,
    pub diameter_convention: DiameterConvention,
    pub aperture_diameter: Param<f64>,
    pub std_x: Param<f64>,
    pub std_y: Param<f64>,
    pub misalignment: Param<f64>,
    pub jitter_rate: Param<f64>,
    pub knee_hz: Param<f64>,
    pub power_w: Param<f64>,
    pub wavelength_nm: Param<f64>,
    pub video_bandwidth: Param<f64>,
    pub estimator: Param<JitterEstimator>,
    pub n_samples: Param<usize>,
    pub tolerance: Param<f64>,
    pub fit: Option<FitConfig>,
    pub spectrum: SpectrumConfig,
    pub shot_reference_hz: Param<f64>,
    pub detector: DetectorModel,
    pub stokes: StokesConfig,
    pub profile: ProfileConfig,
    sources: BTreeMap<String, Source>,
}

impl ScenarioConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let r = Reader {
            raw,
            seen: RefCell::new(BTreeMap::new()),
        };
        let seed = r
            .parse::<u64>("run", "seed")?
            .ok_or_else(|| Error::Config("a seed is required ([run] seed or --seed)".into()))?;
        let out_dir = r.parse::<PathBuf>("run", "out_dir")?.map(|p| raw.resolve(p.value));

        let scenario = r.or("scenario", "name", Scenario::AtmosphereFocussed, Source::Default)?.value;
        let defaults = PresetKnobs::default();
        let knobs = PresetKnobs {
            table_std: r.or("scenario", "table_std_mm", defaults.table_std, Source::Default)?.value,
            unfocussed_factor: r
                .or("scenario", "unfocussed_factor", defaults.unfocussed_factor, Source::Default)?
                .value,
            unfocussed_diameter: r
                .or("scenario", "unfocussed_diameter_mm", defaults.unfocussed_diameter, Source::Default)?
                .value,
            hatch_factor: r.or("scenario", "hatch_factor", defaults.hatch_factor, Source::Default)?.value,
        };
        let preset = ScenarioPreset::new(scenario, &knobs).map_err(to_config)?;
        let diameter_source = if preset.diameter_is_measured() {
            Source::Reference
        } else {
            Source::Default
        };
        let std_source = match scenario {
            Scenario::AtmosphereFocussed => Source::Reference,
            _ => Source::Default,
        };

        let diameter_convention = match r.parse::<String>("beam", "diameter_convention")? {
            None => DiameterConvention::OneOverESquared,
            Some(p) => match p.value.as_str() {
                "one_over_e2" => DiameterConvention::OneOverESquared,
                "fwhm" => DiameterConvention::Fwhm,
                other => {
                    return Err(Error::Config(format!(
                        "unknown diameter_convention `{other}` (one_over_e2, fwhm)"
                    )))
                }
            },
        };
        let mut beam_diameter = r.or("beam", "diameter_mm", preset.beam.diameter(), diameter_source)?;
        beam_diameter.value = diameter_convention.to_one_over_e2(beam_diameter.value);
        let aperture_diameter = r.or(
            "aperture",
            "diameter_mm",
            reference::PHOTODIODE_DIAMETER_MM,
            Source::Reference,
        )?;

        let std_common = r.parse::<f64>("jitter", "std_mm")?;
        let base_std = std_common.unwrap_or(Param::new(preset.jitter.std_x, std_source));
        let std_x = r.parse("jitter", "std_x_mm")?.unwrap_or(base_std);
        let std_y = r.parse("jitter", "std_y_mm")?.unwrap_or(base_std);
        let misalignment = r.or(
            "jitter",
            "misalignment_mm",
            reference::MISALIGNMENT_MM,
            Source::Reference,
        )?;
        let jitter_rate = r.or("jitter", "sample_rate_hz", reference::CAMERA_RATE_HZ, Source::Reference)?;
        let knee_hz = r.or("jitter", "knee_hz", DEFAULT_KNEE_HZ, Source::Default)?;

        let power_uw = r.or("budget", "power_uw", reference::OPTICAL_POWER_W * 1e6, Source::Reference)?;
        let power_w = Param::new(power_uw.value * 1e-6, power_uw.source);
        let wavelength_nm = r.or("budget", "wavelength_nm", reference::WAVELENGTH_NM, Source::Reference)?;
        let video_bandwidth = r.or("budget", "vbw_hz", reference::VIDEO_BANDWIDTH_HZ, Source::Reference)?;
        let estimator = r.or("budget", "estimator", JitterEstimator::TwoPoint, Source::Default)?;
        let n_samples = r.or("budget", "n_samples", 100_000usize, Source::Default)?;
        let tolerance = r.or("budget", "tolerance", DEFAULT_TOLERANCE, Source::Default)?;

        let fit = if r.flag("fit", "enabled", false)?.value {
            Some(FitConfig {
                target: r.or("fit", "target", reference::UNFOCUSSED_JITTER_NOISE, Source::Reference)?,
                rel_tol: r.or("fit", "rel_tol", 0.1, Source::Default)?,
                diameters: (
                    r.or("fit", "diameter_min_mm", 1.5, Source::Default)?.value,
                    r.or("fit", "diameter_max_mm", 3.0, Source::Default)?.value,
                    r.or("fit", "diameter_steps", 16usize, Source::Default)?.value,
                ),
                sigmas: (
                    r.or("fit", "sigma_min_mm", reference::JITTER_STD_MM, Source::Default)?.value,
                    r.or("fit", "sigma_max_mm", 0.027, Source::Default)?.value,
                    r.or("fit", "sigma_steps", 8usize, Source::Default)?.value,
                ),
            })
        } else {
            None
        };

        let sd = SpectrumConfig::default();
        let spectrum = SpectrumConfig {
            rbw: r.or("spectrum", "rbw_hz", sd.rbw, Source::Reference)?.value,
            vbw: r.or("spectrum", "vbw_hz", sd.vbw, Source::Reference)?.value,
            n_points: r.or("spectrum", "n_points", sd.n_points, Source::Reference)?.value,
            f_start: r.or("spectrum", "f_start_hz", sd.f_start, Source::Reference)?.value,
            f_stop: r.or("spectrum", "f_stop_hz", sd.f_stop, Source::Default)?.value,
            traces: r.or("spectrum", "traces", sd.traces, Source::Default)?.value,
        };
        let shot_reference_hz = r.or(
            "spectrum",
            "shot_reference_hz",
            DEFAULT_SHOT_REFERENCE_HZ,
            Source::Reference,
        )?;
        let detector = DetectorModel {
            electronic_noise_db_below_qnl: r
                .or(
                    "detector",
                    "electronic_noise_db_below_qnl",
                    DetectorModel::default().electronic_noise_db_below_qnl,
                    Source::Default,
                )?
                .value,
        };

        let bd = BootstrapOptions::default();
        let stokes = StokesConfig {
            displacement: r.or("stokes", "displacement_snu", 1.0, Source::Default)?,
            transmittance: r.or("stokes", "transmittance", 1.0, Source::Default)?,
            excess_noise: r.or("stokes", "excess_noise_snu", 0.0, Source::Default)?,
            n_shots: r.or("stokes", "n_shots", 100_000usize, Source::Default)?,
            lo_photon_number: r.or("stokes", "lo_photon_number", DEFAULT_LO_PHOTON_NUMBER, Source::Default)?,
            bootstrap: BootstrapOptions {
                resamples: r.or("stokes", "bootstrap_resamples", 200usize, Source::Default)?.value,
                confidence: r.or("stokes", "confidence", bd.confidence, Source::Default)?.value,
                seed: seed.value,
            },
            histogram_bins: r.or("stokes", "histogram_bins", 81usize, Source::Default)?.value,
        };

        let gd = FrameGeometry::default();
        let background = match r.parse::<String>("profile", "background")? {
            None => Background::default(),
            Some(p) => p.value.parse()?,
        };
        let distortion = match r.parse::<String>("profile", "distortion")? {
            None if scenario == Scenario::HatchOpen => Distortion::Hatch,
            None => Distortion::None,
            Some(p) => p.value.parse()?,
        };
        let profile = ProfileConfig {
            input_dir: r.parse::<PathBuf>("profile", "input_dir")?.map(|p| raw.resolve(p.value)),
            frames: r.or(
                "profile",
                "frames",
                reference::FRAMES_PER_SEQUENCE,
                Source::Reference,
            )?,
            geometry: FrameGeometry {
                width: r.or("profile", "width_px", gd.width, Source::Default)?.value,
                height: r.or("profile", "height_px", gd.height, Source::Default)?.value,
                pixel_pitch: r.or("profile", "pixel_pitch_mm", gd.pixel_pitch, Source::Default)?.value,
                exposure: r.or("profile", "exposure_s", gd.exposure, Source::Reference)?.value,
            },
            frame_rate: r.or("profile", "frame_rate_hz", reference::CAMERA_RATE_HZ, Source::Reference)?,
            noise_rel_peak: r.or("profile", "noise_rel_peak", 1e-3, Source::Default)?,
            distortion,
            background,
            write_frames: r.flag("profile", "write_frames", false)?.value,
        };

        let cfg = ScenarioConfig {
            seed,
            out_dir,
            scenario,
            knobs,
            beam_diameter,
            diameter_convention,
            aperture_diameter,
            std_x,
            std_y,
            misalignment,
            jitter_rate,
            knee_hz,
            power_w,
            wavelength_nm,
            video_bandwidth,
            estimator,
            n_samples,
            tolerance,
            fit,
            spectrum,
            shot_reference_hz,
            detector,
            stokes,
            profile,
            sources: r.seen.into_inner(),
        };
        cfg.validate().map_err(to_config)?;
        Ok(cfg)
    }

    /// Checks every value against the invariants of the module that owns it.
    pub fn validate(&self) -> Result<()> {
        self.beam()?;
        self.aperture()?;
        self.jitter()?;
        self.budget_inputs()?;
        if !(self.tolerance.value > 0.0 && self.tolerance.value <= crate::beam::MAX_TOLERANCE) {
            return Err(Error::invalid("tolerance", "must lie in (0, 1e-3]"));
        }
        if self.n_samples.value < 2 {
            return Err(Error::invalid("n_samples", "need at least 2 samples"));
        }
        self.spectrum.validate()?;
        self.detector.validate()?;
        crate::stokes::ChannelParams::new(self.stokes.transmittance.value, self.stokes.excess_noise.value)?;
        crate::stokes::prepare_alphabet_with_lo(
            self.stokes.displacement.value,
            self.stokes.lo_photon_number.value,
        )?;
        if self.stokes.n_shots.value < 2 * crate::stokes::MIN_SEQUENCE_LEN {
            return Err(Error::invalid("n_shots", "need at least 200 shots"));
        }
        self.profile.geometry.validate()?;
        if self.profile.frames.value < 2 {
            return Err(Error::invalid("frames", "need at least 2 frames"));
        }
        if let Some(fit) = &self.fit {
            if fit.diameters.2 == 0 || fit.sigmas.2 == 0 {
                return Err(Error::invalid("fit", "grid steps must be >= 1"));
            }
        }
        Ok(())
    }

    /// Origin of the value behind a dotted `section.key`; keys that were not
    /// looked up count as defaults.
    pub fn source(&self, dotted: &str) -> Source {
        self.sources.get(dotted).copied().unwrap_or(Source::Default)
    }

    pub fn beam(&self) -> Result<GaussianBeam> {
        GaussianBeam::new(self.power_w.value.max(f64::MIN_POSITIVE), self.beam_diameter.value, Point::ORIGIN)
    }

    pub fn aperture(&self) -> Result<CircularAperture> {
        CircularAperture::centered(self.aperture_diameter.value)
    }

    pub fn jitter(&self) -> Result<JitterSpec> {
        JitterSpec::new(
            self.std_x.value,
            self.std_y.value,
            self.jitter_rate.value,
            self.misalignment.value,
        )
    }

    /// Jitter with the AR(1) shaping used for spectra.
    pub fn spectrum_jitter(&self) -> Result<JitterSpec> {
        self.jitter()?.with_correlation(Correlation::FirstOrder {
            knee_hz: self.knee_hz.value,
        })
    }

    pub fn budget_inputs(&self) -> Result<BudgetInputs> {
        BudgetInputs::new(self.power_w.value, self.wavelength_nm.value, self.video_bandwidth.value)
    }
}

impl RawConfig {
    fn resolve(&self, p: PathBuf) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        }
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config(format!("{name}: {reason}")),
        other => other,
    }
}

/// A `--sweep key=a:b:n` request.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("sweep must look like section.key=start:stop:count, got `{s}`"));
        let (key, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        let values = if n == 1 { vec![a] } else { crate::budget::linspace(a, b, n) };
        // 12 significant digits drops the binary noise of the linspace steps
        let values = values
            .into_iter()
            .map(|v| format!("{v:.11e}").parse().unwrap_or(v))
            .collect();
        Ok(Sweep {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Shortest decimal text that parses back to `v`, for feeding sweep values
/// through the config parser.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}
