//! Parameters of the 100 m rooftop link measurement that the presets and
//! reports are anchored to. Values not listed here are artifact defaults.

/// Laser wavelength (nm).
pub const WAVELENGTH_NM: f64 = 809.0;
/// Optical power set in front of the photodiode for both beams (W).
pub const OPTICAL_POWER_W: f64 = 650e-6;
/// Spectrum analyzer video bandwidth (Hz).
pub const VIDEO_BANDWIDTH_HZ: f64 = 100.0;
/// Spectrum analyzer resolution bandwidth (Hz).
pub const RESOLUTION_BANDWIDTH_HZ: f64 = 10e3;
/// Points per analyzer trace.
pub const TRACE_POINTS: usize = 401;
/// Fractional accuracy of the normalized intensity-noise traces.
pub const TRACE_ACCURACY: f64 = 0.05;
/// Signal modulation frequency (Hz); above this the link showed no excess noise.
pub const MODULATION_FREQUENCY_HZ: f64 = 1e6;
/// Lowest frequency of the recorded intensity-noise traces (Hz).
pub const LOWEST_TRACE_FREQUENCY_HZ: f64 = 80e3;

/// Mean focussed beam diameter at the detector (mm).
pub const BEAM_DIAMETER_MM: f64 = 0.98;
/// Photodiode active-area diameter (mm).
pub const PHOTODIODE_DIAMETER_MM: f64 = 3.0;
/// Mean standard deviation of the focussed atmospheric beam-center wander (mm).
pub const JITTER_STD_MM: f64 = 0.0134;
/// Static alignment inaccuracy of the detector (mm).
pub const MISALIGNMENT_MM: f64 = 0.2;
/// Frequency the camera statistics are attributed to (Hz).
pub const CAMERA_RATE_HZ: f64 = 50e3;
/// Beam-profile exposure time (s).
pub const EXPOSURE_S: f64 = 20e-6;
/// Frames per beam-profile sequence.
pub const FRAMES_PER_SEQUENCE: usize = 650;

/// Published estimate of the focussed-detection jitter intensity noise.
pub const FOCUSSED_JITTER_NOISE: f64 = 7e-8;
/// Published estimate of the unfocussed-detection jitter intensity noise.
pub const UNFOCUSSED_JITTER_NOISE: f64 = 4.4e-7;
/// Published mean photon number per video-bandwidth period.
pub const MEAN_PHOTON_NUMBER: f64 = 2.65e13;
/// Published photon energy at 809 nm (J).
pub const PHOTON_ENERGY_J: f64 = 2.45e-19;
