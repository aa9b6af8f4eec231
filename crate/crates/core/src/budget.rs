//! Shot-noise budget and jitter-induced relative intensity noise.

use rayon::prelude::*;

use crate::beam::{self, CircularAperture, ClippedFraction, GaussianBeam, Point};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::jitter::{sample_centers, JitterSpec};

/// Planck constant (J s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s), exact SI value.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Energy of one photon (J) at `wavelength_nm`.
pub fn photon_energy(wavelength_nm: f64) -> Result<f64> {
    ensure_positive("wavelength_nm", wavelength_nm)?;
    Ok(PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetInputs {
    /// W
    pub optical_power: f64,
    /// nm
    pub wavelength: f64,
    /// Hz; one measurement period lasts `1 / video_bandwidth`.
    pub video_bandwidth: f64,
}

impl BudgetInputs {
    pub fn new(optical_power: f64, wavelength: f64, video_bandwidth: f64) -> Result<Self> {
        let inputs = Self {
            optical_power,
            wavelength,
            video_bandwidth,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        // zero power is allowed: it budgets to zero photons
        ensure_non_negative("optical_power", self.optical_power)?;
        ensure_positive("wavelength", self.wavelength)?;
        ensure_positive("video_bandwidth", self.video_bandwidth)
    }

    /// Detected energy per measurement period (J).
    pub fn energy_per_period(&self) -> f64 {
        self.optical_power / self.video_bandwidth
    }
}

/// Mean photon number per measurement period, `(P / VBW) / (h c / λ)`.
pub fn mean_photon_number(inputs: &BudgetInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.energy_per_period() / photon_energy(inputs.wavelength)?)
}

/// Relative shot noise `√n / n` of a coherent beam carrying `n` photons.
pub fn relative_shot_noise(mean_photon_number: f64) -> Result<f64> {
    if !(mean_photon_number > 0.0) || !mean_photon_number.is_finite() {
        return Err(Error::invalid(
            "mean_photon_number",
            format!("must be finite and > 0, got {mean_photon_number}"),
        ));
    }
    Ok(mean_photon_number.sqrt().recip())
}

/// How beam-center jitter is turned into a relative intensity fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterEstimator {
    /// Compare the captured fraction at the static offset with the fraction
    /// one radial jitter std further out.
    TwoPoint,
    /// Relative std of the captured fraction over Monte Carlo centers.
    EnsembleRms,
}

impl std::str::FromStr for JitterEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_point" => Ok(Self::TwoPoint),
            "ensemble_rms" => Ok(Self::EnsembleRms),
            other => Err(Error::Config(format!(
                "unknown estimator `{other}` (expected two_point or ensemble_rms)"
            ))),
        }
    }
}

impl JitterEstimator {
    pub fn name(self) -> &'static str {
        match self {
            Self::TwoPoint => "two_point",
            Self::EnsembleRms => "ensemble_rms",
        }
    }
}

/// Relative intensity noise at the detector caused by beam-center jitter.
///
/// The static misalignment is applied along +x from the beam's own center.
#[allow(clippy::too_many_arguments)]
pub fn jitter_intensity_noise(
    beam: &GaussianBeam,
    aperture: &CircularAperture,
    jitter: &JitterSpec,
    estimator: JitterEstimator,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<f64> {
    jitter.validate()?;
    match estimator {
        JitterEstimator::TwoPoint => two_point_noise(beam, aperture, jitter, tol),
        JitterEstimator::EnsembleRms => {
            let fractions = ensemble_fractions(beam, aperture, jitter, n_samples, seed, tol)?;
            Ok(relative_std(&fractions))
        }
    }
}

fn two_point_noise(
    beam: &GaussianBeam,
    aperture: &CircularAperture,
    jitter: &JitterSpec,
    tol: f64,
) -> Result<f64> {
    let sigma = jitter.radial_std();
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let base = shifted(beam.center(), jitter.offset()).distance(aperture.center());
    let near = beam::radial_fraction(beam.radius(), aperture.radius(), base, tol)?;
    let far = beam::radial_fraction(beam.radius(), aperture.radius(), base + sigma, tol)?;
    let delta = if near.route() == beam::Route::Deficit && far.route() == beam::Route::Deficit {
        far.deficit() - near.deficit()
    } else {
        near.fraction() - far.fraction()
    };
    if near.fraction() == 0.0 {
        return Err(Error::Degenerate(
            "beam misses the aperture at the operating point".into(),
        ));
    }
    Ok(delta.abs() / near.fraction())
}

/// Captured fractions for Monte Carlo beam centers drawn from `jitter`, in
/// sample order.
pub fn ensemble_fractions(
    beam: &GaussianBeam,
    aperture: &CircularAperture,
    jitter: &JitterSpec,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<ClippedFraction>> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be >= 1"));
    }
    if !(tol > 0.0 && tol <= beam::MAX_TOLERANCE) {
        return Err(Error::invalid("tol", format!("must lie in (0, 1e-3], got {tol:e}")));
    }
    let centers = sample_centers(jitter, n_samples, seed)?;
    let w = beam.radius();
    let r_ap = aperture.radius();
    centers
        .points()
        .par_iter()
        .map(|c| {
            let offset = shifted(beam.center(), *c).distance(aperture.center());
            beam::radial_fraction(w, r_ap, offset, tol)
        })
        .collect()
}

fn shifted(p: Point, by: Point) -> Point {
    Point::new(p.x + by.x, p.y + by.y)
}

/// `std(F) / mean(F)` with the n − 1 denominator. Deviations are formed from
/// the integrated side of each fraction so near-unity captures keep precision.
pub fn relative_std(fractions: &[ClippedFraction]) -> f64 {
    let n = fractions.len();
    if n < 2 {
        return 0.0;
    }
    let all_deficit = fractions.iter().all(|f| f.route() == beam::Route::Deficit);
    let values: Vec<f64> = if all_deficit {
        fractions.iter().map(|f| f.deficit()).collect()
    } else {
        fractions.iter().map(|f| f.fraction()).collect()
    };
    let shift = values[0];
    let (s1, s2) = values.iter().fold((0.0, 0.0), |(s1, s2), v| {
        let d = v - shift;
        (s1 + d, s2 + d * d)
    });
    let nf = n as f64;
    let var = ((s2 - s1 * s1 / nf) / (nf - 1.0)).max(0.0);
    let mean_fraction = if all_deficit {
        1.0 - (shift + s1 / nf)
    } else {
        shift + s1 / nf
    };
    if mean_fraction == 0.0 {
        return 0.0;
    }
    var.sqrt() / mean_fraction
}

/// Total noise relative to the quantum noise limit, with shot noise as the
/// unit: `10 log10(1 + (rin / rsn)²)`.
pub fn noise_vs_qnl_db(relative_intensity_noise: f64, relative_shot_noise: f64) -> Result<f64> {
    ensure_positive("relative_shot_noise", relative_shot_noise)?;
    ensure_non_negative("relative_intensity_noise", relative_intensity_noise)?;
    let ratio = relative_intensity_noise / relative_shot_noise;
    Ok(10.0 * (ratio * ratio).ln_1p() / std::f64::consts::LN_10)
}

/// Alternative reading that treats the amplitude ratio `rin / rsn` itself as a
/// power ratio: `10 log10(rin / rsn)`.
pub fn amplitude_ratio_db(relative_intensity_noise: f64, relative_shot_noise: f64) -> Result<f64> {
    ensure_positive("relative_shot_noise", relative_shot_noise)?;
    ensure_positive("relative_intensity_noise", relative_intensity_noise)?;
    Ok(10.0 * (relative_intensity_noise / relative_shot_noise).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseReport {
    pub mean_photon_number: f64,
    pub relative_shot_noise: f64,
    pub relative_intensity_noise: f64,
    pub noise_vs_qnl_db: f64,
}

impl NoiseReport {
    pub fn new(inputs: &BudgetInputs, relative_intensity_noise: f64) -> Result<Self> {
        let n = mean_photon_number(inputs)?;
        let rsn = relative_shot_noise(n)?;
        Ok(Self {
            mean_photon_number: n,
            relative_shot_noise: rsn,
            relative_intensity_noise,
            noise_vs_qnl_db: noise_vs_qnl_db(relative_intensity_noise, rsn)?,
        })
    }

    pub const CSV_HEADER: &'static str =
        "mean_photon_number,relative_shot_noise,relative_intensity_noise,noise_vs_qnl_db";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.9e},{:.9e},{:.9e},{:.6}",
            self.mean_photon_number,
            self.relative_shot_noise,
            self.relative_intensity_noise,
            self.noise_vs_qnl_db
        )
    }

    /// `key=value` lines, one per field.
    pub fn to_key_value(&self) -> String {
        format!(
            "mean_photon_number={:.9e}\nrelative_shot_noise={:.9e}\nrelative_intensity_noise={:.9e}\nnoise_vs_qnl_db={:.6}\n",
            self.mean_photon_number,
            self.relative_shot_noise,
            self.relative_intensity_noise,
            self.noise_vs_qnl_db
        )
    }
}

/// Convention behind a quoted beam diameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterConvention {
    /// 1/e² intensity diameter (equal to D4σ for a Gaussian).
    OneOverESquared,
    /// Full width at half maximum.
    Fwhm,
}

impl DiameterConvention {
    /// Converts a diameter quoted in this convention to the 1/e² diameter.
    pub fn to_one_over_e2(self, diameter: f64) -> f64 {
        match self {
            Self::OneOverESquared => diameter,
            Self::Fwhm => diameter * 2.0 / (2.0 * std::f64::consts::LN_2).sqrt(),
        }
    }
}

/// One evaluated (diameter, σ) pair of an inverse fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub diameter: f64,
    pub sigma: f64,
    pub noise: f64,
    /// True when the point was located by root refinement rather than the grid.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseFit {
    pub target: f64,
    pub rel_tol: f64,
    /// Every grid point plus the refined contour points.
    pub points: Vec<FitPoint>,
}

impl InverseFit {
    /// Points whose noise is within `rel_tol` of the target.
    pub fn feasible(&self) -> impl Iterator<Item = &FitPoint> {
        self.points
            .iter()
            .filter(|p| (p.noise / self.target - 1.0).abs() <= self.rel_tol)
    }

    /// Feasible point closest to the target, if any.
    pub fn best(&self) -> Option<&FitPoint> {
        self.feasible().min_by(|a, b| {
            let da = (a.noise / self.target - 1.0).abs();
            let db = (b.noise / self.target - 1.0).abs();
            da.total_cmp(&db)
        })
    }

    pub const CSV_HEADER: &'static str = "diameter_mm,sigma_mm,noise,feasible,refined";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for p in &self.points {
            let ok = (p.noise / self.target - 1.0).abs() <= self.rel_tol;
            out.push_str(&format!(
                "{:.6},{:.6},{:.9e},{},{}\n",
                p.diameter, p.sigma, p.noise, ok as u8, p.refined as u8
            ));
        }
        out
    }
}

/// Scans beam diameter × jitter std for parameter sets whose two-point jitter
/// noise hits `target`. Along each σ row where the grid brackets the target,
/// the crossing diameter is refined by bisection.
pub fn inverse_fit(
    aperture: &CircularAperture,
    misalignment: f64,
    target: f64,
    rel_tol: f64,
    diameters: &[f64],
    sigmas: &[f64],
    tol: f64,
) -> Result<InverseFit> {
    ensure_positive("target", target)?;
    ensure_positive("rel_tol", rel_tol)?;
    if diameters.is_empty() || sigmas.is_empty() {
        return Err(Error::invalid("grid", "diameter and sigma grids must be non-empty"));
    }
    let noise_at = |diameter: f64, sigma: f64| -> Result<f64> {
        let beam = GaussianBeam::unit(diameter)?;
        let jitter = JitterSpec::isotropic(sigma, misalignment)?;
        two_point_noise(&beam, aperture, &jitter, tol)
    };
    let mut points = Vec::new();
    for &sigma in sigmas {
        let row = diameters
            .iter()
            .map(|&d| {
                noise_at(d, sigma).map(|noise| FitPoint {
                    diameter: d,
                    sigma,
                    noise,
                    refined: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for pair in row.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let sa = a.noise - target;
            let sb = b.noise - target;
            if sa == 0.0 || sb == 0.0 || sa.signum() == sb.signum() {
                continue;
            }
            let (mut lo, mut hi, mut s_lo) = (a.diameter, b.diameter, sa);
            let mut mid_noise = a.noise;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                mid_noise = noise_at(mid, sigma)?;
                let s = mid_noise - target;
                if s.signum() == s_lo.signum() {
                    lo = mid;
                    s_lo = s;
                } else {
                    hi = mid;
                }
                if (mid_noise / target - 1.0).abs() < 1e-6 {
                    break;
                }
            }
            points.push(FitPoint {
                diameter: 0.5 * (lo + hi),
                sigma,
                noise: mid_noise,
                refined: true,
            });
        }
        points.extend(row);
    }
    Ok(InverseFit {
        target,
        rel_tol,
        points,
    })
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::DEFAULT_TOLERANCE;
    use crate::reference;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn photon_energy_values() {
        let e809 = photon_energy(809.0).unwrap();
        assert!(rel(e809, 2.45e-19) < 0.005, "{e809}");
        assert!(rel(photon_energy(404.5).unwrap(), 2.0 * e809) < 1e-15);
        assert!(rel(photon_energy(1000.0).unwrap(), 1.986e-19) < 1e-3);
        assert!(photon_energy(0.0).is_err());
    }

    #[test]
    fn mean_photon_number_values() {
        let n = mean_photon_number(&BudgetInputs::new(650e-6, 809.0, 100.0).unwrap()).unwrap();
        assert!(rel(n, 2.65e13) < 0.01, "{n}");
        let zero = mean_photon_number(&BudgetInputs::new(0.0, 809.0, 100.0).unwrap()).unwrap();
        assert_eq!(zero, 0.0);
        let n2 = mean_photon_number(&BudgetInputs::new(1e-3, 809.0, 1e3).unwrap()).unwrap();
        // 1e-6 J / (h c / 809 nm)
        assert!(rel(n2, 4.0726e12) < 1e-3, "{n2}");
    }

    #[test]
    fn budget_inputs_validated() {
        assert!(BudgetInputs::new(-1.0, 809.0, 100.0).is_err());
        assert!(BudgetInputs::new(1.0, 0.0, 100.0).is_err());
        assert!(BudgetInputs::new(1.0, 809.0, 0.0).is_err());
    }

    #[test]
    fn shot_noise_values() {
        assert!(rel(relative_shot_noise(2.65e13).unwrap(), 1.94e-7) < 0.002);
        assert_eq!(relative_shot_noise(1.0).unwrap(), 1.0);
        assert!(rel(relative_shot_noise(1e4).unwrap(), 1e-2) < 1e-15);
        assert!(relative_shot_noise(0.0).is_err());
        assert!(relative_shot_noise(-3.0).is_err());
    }

    #[test]
    fn qnl_db_values() {
        assert_eq!(noise_vs_qnl_db(0.0, 1e-7).unwrap(), 0.0);
        assert!((noise_vs_qnl_db(2e-7, 2e-7).unwrap() - 3.0103).abs() < 1e-4);
        let db = noise_vs_qnl_db(4.4e-7, 1.94e-7).unwrap();
        assert!((db - 10.0 * (1.0f64 + (4.4f64 / 1.94).powi(2)).log10()).abs() < 1e-12);
        assert!((db - 7.9).abs() < 0.05, "{db}");
        assert!(noise_vs_qnl_db(1.0, 0.0).is_err());
        let alt = amplitude_ratio_db(4.4e-7, 1.94e-7).unwrap();
        assert!((alt - 3.556).abs() < 0.01, "{alt}");
    }

    #[test]
    fn focussed_two_point_matches_bessel_oracle() {
        let beam = GaussianBeam::unit(reference::BEAM_DIAMETER_MM).unwrap();
        let ap = CircularAperture::centered(reference::PHOTODIODE_DIAMETER_MM).unwrap();
        let jitter = JitterSpec::isotropic(reference::JITTER_STD_MM, reference::MISALIGNMENT_MM).unwrap();
        let v = jitter_intensity_noise(&beam, &ap, &jitter, JitterEstimator::TwoPoint, 0, 0, DEFAULT_TOLERANCE)
            .unwrap();
        // 30-digit quadrature of the angular closed form
        assert!(rel(v, 4.832_906_021_01e-8) < 1e-6, "{v:e}");
    }

    #[test]
    fn zero_sigma_gives_zero_noise() {
        let beam = GaussianBeam::unit(0.98).unwrap();
        let ap = CircularAperture::centered(3.0).unwrap();
        let jitter = JitterSpec::isotropic(0.0, 0.2).unwrap();
        for est in [JitterEstimator::TwoPoint, JitterEstimator::EnsembleRms] {
            let v = jitter_intensity_noise(&beam, &ap, &jitter, est, 100, 1, DEFAULT_TOLERANCE).unwrap();
            assert_eq!(v, 0.0, "{est:?}");
        }
    }

    #[test]
    fn ensemble_close_to_two_point() {
        let beam = GaussianBeam::unit(0.98).unwrap();
        let ap = CircularAperture::centered(3.0).unwrap();
        let jitter = JitterSpec::isotropic(0.0134, 0.2).unwrap();
        let two = jitter_intensity_noise(&beam, &ap, &jitter, JitterEstimator::TwoPoint, 0, 0, DEFAULT_TOLERANCE)
            .unwrap();
        let ens = jitter_intensity_noise(&beam, &ap, &jitter, JitterEstimator::EnsembleRms, 2000, 9, DEFAULT_TOLERANCE)
            .unwrap();
        assert!(ens / two < 3.0 && two / ens < 3.0, "{two:e} {ens:e}");
    }

    #[test]
    fn fwhm_conversion() {
        let d = DiameterConvention::Fwhm.to_one_over_e2(1.0);
        // FWHM = w·sqrt(2 ln 2), 1/e² diameter = 2w
        assert!((d - 1.698_643).abs() < 1e-6);
        assert_eq!(DiameterConvention::OneOverESquared.to_one_over_e2(0.98), 0.98);
    }

    #[test]
    fn inverse_fit_locates_contour() {
        let ap = CircularAperture::centered(3.0).unwrap();
        let fit = inverse_fit(
            &ap,
            0.2,
            4.4e-7,
            0.1,
            &linspace(0.98, 1.2, 12),
            &[0.0134, 0.0174],
            1e-10,
        )
        .unwrap();
        let best = fit.best().expect("contour crosses the grid");
        assert!(rel(best.noise, 4.4e-7) < 1e-3);
        assert!(best.refined);
        assert!(fit.to_csv().lines().count() > 24);
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        assert!(linspace(1.0, 2.0, 0).is_empty());
    }
}
