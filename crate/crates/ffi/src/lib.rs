//! C ABI for the skylink noise-budget library.
//!
//! Every fallible function returns a [`SkylinkStatus`] and writes results
//! through out-pointers. On failure a message is kept per thread and can be
//! read with [`skylink_last_error`]. Objects handed to C are opaque and must be
//! released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use skylink::beam::{clipped_power_fraction, CircularAperture, GaussianBeam, Point};
use skylink::budget::{self, BudgetInputs, JitterEstimator};
use skylink::jitter::{sample_centers, CenterSeries, JitterSpec, PresetKnobs, Scenario, ScenarioPreset};
use skylink::spectrum::{self, PhotocurrentModel, SpectrumConfig, SpectrumRun};
use skylink::{reference, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkylinkStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Numerical = 3,
    TooShort = 4,
    Io = 5,
    Panic = 6,
    OutOfRange = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkylinkEstimator {
    TwoPoint = 0,
    EnsembleRms = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkylinkScenario {
    Table = 0,
    AtmosphereFocussed = 1,
    AtmosphereUnfocussed = 2,
    HatchOpen = 3,
}

impl From<SkylinkScenario> for Scenario {
    fn from(s: SkylinkScenario) -> Self {
        match s {
            SkylinkScenario::Table => Scenario::Table,
            SkylinkScenario::AtmosphereFocussed => Scenario::AtmosphereFocussed,
            SkylinkScenario::AtmosphereUnfocussed => Scenario::AtmosphereUnfocussed,
            SkylinkScenario::HatchOpen => Scenario::HatchOpen,
        }
    }
}

/// Beam-center samples owned by the library.
pub struct SkylinkCenterSeries(CenterSeries);

/// Signal, reference and QNL-normalized analyzer traces owned by the library.
pub struct SkylinkSpectrum(SpectrumRun);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SkylinkStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::GridMismatch(_) => {
            SkylinkStatus::InvalidArgument
        }
        Error::GeometryMismatch { .. } | Error::Format { .. } => SkylinkStatus::InvalidArgument,
        Error::Integration { .. } | Error::Degenerate(_) => SkylinkStatus::Numerical,
        Error::TooShort { .. } => SkylinkStatus::TooShort,
        Error::Io { .. } => SkylinkStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SkylinkStatus>) -> SkylinkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkylinkStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            SkylinkStatus::Panic
        }
    }
}

fn lift<T>(r: skylink::Result<T>) -> Result<T, SkylinkStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, SkylinkStatus> {
    // SAFETY: the caller guarantees `p` is either null or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| {
        set_error(format!("`{name}` is null"));
        SkylinkStatus::NullPointer
    })
}

fn input<'a, T>(p: *const T, name: &str) -> Result<&'a T, SkylinkStatus> {
    // SAFETY: the caller guarantees `p` is either null or a live handle.
    unsafe { p.as_ref() }.ok_or_else(|| {
        set_error(format!("`{name}` is null"));
        SkylinkStatus::NullPointer
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn skylink_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Photon energy (J) at `wavelength_nm`.
#[no_mangle]
pub extern "C" fn skylink_photon_energy(wavelength_nm: f64, out_joules: *mut f64) -> SkylinkStatus {
    guard(|| {
        *out(out_joules, "out_joules")? = lift(budget::photon_energy(wavelength_nm))?;
        Ok(())
    })
}

/// Mean photon number per video-bandwidth period.
#[no_mangle]
pub extern "C" fn skylink_mean_photon_number(
    power_w: f64,
    wavelength_nm: f64,
    video_bandwidth_hz: f64,
    out_n: *mut f64,
) -> SkylinkStatus {
    guard(|| {
        let inputs = lift(BudgetInputs::new(power_w, wavelength_nm, video_bandwidth_hz))?;
        *out(out_n, "out_n")? = lift(budget::mean_photon_number(&inputs))?;
        Ok(())
    })
}

/// Relative shot noise `1/sqrt(n)`.
#[no_mangle]
pub extern "C" fn skylink_relative_shot_noise(mean_photon_number: f64, out_rsn: *mut f64) -> SkylinkStatus {
    guard(|| {
        *out(out_rsn, "out_rsn")? = lift(budget::relative_shot_noise(mean_photon_number))?;
        Ok(())
    })
}

/// Fraction of a unit-power Gaussian beam captured by a circular aperture.
/// Lengths in mm; `tolerance` 0 selects the default. `out_deficit` may be null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn skylink_clipped_power_fraction(
    beam_diameter_mm: f64,
    beam_x_mm: f64,
    beam_y_mm: f64,
    aperture_diameter_mm: f64,
    aperture_x_mm: f64,
    aperture_y_mm: f64,
    tolerance: f64,
    out_fraction: *mut f64,
    out_deficit: *mut f64,
) -> SkylinkStatus {
    guard(|| {
        let beam = lift(GaussianBeam::new(1.0, beam_diameter_mm, Point::new(beam_x_mm, beam_y_mm)))?;
        let ap = lift(CircularAperture::new(
            aperture_diameter_mm,
            Point::new(aperture_x_mm, aperture_y_mm),
        ))?;
        let tol = if tolerance == 0.0 { skylink::beam::DEFAULT_TOLERANCE } else { tolerance };
        let f = lift(clipped_power_fraction(&beam, &ap, tol))?;
        *out(out_fraction, "out_fraction")? = f.fraction();
        if !out_deficit.is_null() {
            *out(out_deficit, "out_deficit")? = f.deficit();
        }
        Ok(())
    })
}

/// Relative intensity noise from beam jitter on a centered aperture, with the
/// misalignment applied along +x.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn skylink_jitter_intensity_noise(
    beam_diameter_mm: f64,
    aperture_diameter_mm: f64,
    std_x_mm: f64,
    std_y_mm: f64,
    misalignment_mm: f64,
    estimator: SkylinkEstimator,
    n_samples: u64,
    seed: u64,
    tolerance: f64,
    out_noise: *mut f64,
) -> SkylinkStatus {
    guard(|| {
        let beam = lift(GaussianBeam::unit(beam_diameter_mm))?;
        let ap = lift(CircularAperture::centered(aperture_diameter_mm))?;
        let jitter = lift(JitterSpec::new(
            std_x_mm,
            std_y_mm,
            reference::CAMERA_RATE_HZ,
            misalignment_mm,
        ))?;
        let est = match estimator {
            SkylinkEstimator::TwoPoint => JitterEstimator::TwoPoint,
            SkylinkEstimator::EnsembleRms => JitterEstimator::EnsembleRms,
        };
        let tol = if tolerance == 0.0 { skylink::beam::DEFAULT_TOLERANCE } else { tolerance };
        let n = usize::try_from(n_samples).map_err(|_| {
            set_error("n_samples does not fit in usize".into());
            SkylinkStatus::OutOfRange
        })?;
        *out(out_noise, "out_noise")? =
            lift(budget::jitter_intensity_noise(&beam, &ap, &jitter, est, n, seed, tol))?;
        Ok(())
    })
}

/// Draws `n` independent beam centers. Free the result with
/// [`skylink_center_series_free`].
#[no_mangle]
pub extern "C" fn skylink_sample_centers(
    std_x_mm: f64,
    std_y_mm: f64,
    sample_rate_hz: f64,
    misalignment_mm: f64,
    n: usize,
    seed: u64,
    out_series: *mut *mut SkylinkCenterSeries,
) -> SkylinkStatus {
    guard(|| {
        let slot = out(out_series, "out_series")?;
        let spec = lift(JitterSpec::new(std_x_mm, std_y_mm, sample_rate_hz, misalignment_mm))?;
        let series = lift(sample_centers(&spec, n, seed))?;
        *slot = Box::into_raw(Box::new(SkylinkCenterSeries(series)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn skylink_center_series_len(
    series: *const SkylinkCenterSeries,
    out_len: *mut usize,
) -> SkylinkStatus {
    guard(|| {
        *out(out_len, "out_len")? = input(series, "series")?.0.len();
        Ok(())
    })
}

/// Center `index` in mm.
#[no_mangle]
pub extern "C" fn skylink_center_series_get(
    series: *const SkylinkCenterSeries,
    index: usize,
    out_x_mm: *mut f64,
    out_y_mm: *mut f64,
) -> SkylinkStatus {
    guard(|| {
        let s = &input(series, "series")?.0;
        let p = s.points().get(index).ok_or_else(|| {
            set_error(format!("index {index} out of range for {} centers", s.len()));
            SkylinkStatus::OutOfRange
        })?;
        *out(out_x_mm, "out_x_mm")? = p.x;
        *out(out_y_mm, "out_y_mm")? = p.y;
        Ok(())
    })
}

/// Releases a series. Null is ignored.
///
/// # Safety
/// `series` must come from [`skylink_sample_centers`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn skylink_center_series_free(series: *mut SkylinkCenterSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Simulates the analyzer traces of a scenario preset with the default
/// analyzer settings (10 kHz RBW, 100 Hz VBW, 401 points). `f_stop_hz` 0
/// selects the default span. Free the result with [`skylink_spectrum_free`].
#[no_mangle]
pub extern "C" fn skylink_simulate_spectrum(
    scenario: SkylinkScenario,
    f_stop_hz: f64,
    seed: u64,
    out_spectrum: *mut *mut SkylinkSpectrum,
) -> SkylinkStatus {
    guard(|| {
        let slot = out(out_spectrum, "out_spectrum")?;
        let preset = lift(ScenarioPreset::new(scenario.into(), &PresetKnobs::default()))?;
        let inputs = lift(BudgetInputs::new(
            reference::OPTICAL_POWER_W,
            reference::WAVELENGTH_NM,
            reference::VIDEO_BANDWIDTH_HZ,
        ))?;
        let rsn = lift(budget::mean_photon_number(&inputs).and_then(budget::relative_shot_noise))?;
        let model = lift(PhotocurrentModel::from_preset(
            &preset,
            lift(CircularAperture::centered(reference::PHOTODIODE_DIAMETER_MM))?,
            rsn,
            spectrum::DEFAULT_KNEE_HZ,
        ))?;
        let mut config = SpectrumConfig::default();
        if f_stop_hz != 0.0 {
            config.f_stop = f_stop_hz;
        }
        let run = lift(spectrum::simulate_spectrum(&model, &config, seed))?;
        *slot = Box::into_raw(Box::new(SkylinkSpectrum(run)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn skylink_spectrum_len(spectrum: *const SkylinkSpectrum, out_len: *mut usize) -> SkylinkStatus {
    guard(|| {
        *out(out_len, "out_len")? = input(spectrum, "spectrum")?.0.normalized.len();
        Ok(())
    })
}

/// Point `index` of the normalized trace: frequency (Hz) and dB relative to
/// the quantum-noise-limited reference.
#[no_mangle]
pub extern "C" fn skylink_spectrum_point(
    spectrum: *const SkylinkSpectrum,
    index: usize,
    out_frequency_hz: *mut f64,
    out_db_rel_qnl: *mut f64,
) -> SkylinkStatus {
    guard(|| {
        let n = &input(spectrum, "spectrum")?.0.normalized;
        if index >= n.len() {
            set_error(format!("index {index} out of range for {} points", n.len()));
            return Err(SkylinkStatus::OutOfRange);
        }
        *out(out_frequency_hz, "out_frequency_hz")? = n.frequencies[index];
        *out(out_db_rel_qnl, "out_db_rel_qnl")? = n.power_db[index];
        Ok(())
    })
}

/// Releases a spectrum. Null is ignored.
///
/// # Safety
/// `spectrum` must come from [`skylink_simulate_spectrum`] and not be used
/// again.
#[no_mangle]
pub unsafe extern "C" fn skylink_spectrum_free(spectrum: *mut SkylinkSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}
