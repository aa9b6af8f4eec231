//! Coherent polarization states, lossy noisy channels and Ŝ₂ homodyne
//! statistics in shot-noise units (SNU).
//!
//! The LO is Ŝ₁-polarized and bright, so Ŝ₂ outcomes are modeled in the
//! linearized regime: Gaussian with mean equal to the signal displacement and
//! variance 1 SNU for coherent states, plus any channel excess noise.

use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::rng::{self, Domain};

/// LO photons per measurement interval when none is specified.
pub const DEFAULT_LO_PHOTON_NUMBER: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentPolarizationState {
    lo_photon_number: f64,
    s2: f64,
    s3: f64,
    /// Ŝ₂ measurement variance in SNU.
    variance: f64,
}

impl CoherentPolarizationState {
    pub fn new(lo_photon_number: f64, s2_displacement: f64, s3_displacement: f64) -> Result<Self> {
        ensure_positive("lo_photon_number", lo_photon_number)?;
        ensure_finite("s2_displacement", s2_displacement)?;
        ensure_finite("s3_displacement", s3_displacement)?;
        Ok(Self {
            lo_photon_number,
            s2: s2_displacement,
            s3: s3_displacement,
            variance: 1.0,
        })
    }

    pub fn lo_photon_number(&self) -> f64 {
        self.lo_photon_number
    }

    pub fn s2_displacement(&self) -> f64 {
        self.s2
    }

    pub fn s3_displacement(&self) -> f64 {
        self.s3
    }

    /// Ŝ₂ variance in SNU; 1 for a pure coherent state.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Mean signal photons, `(s2² + s3²) / 4` (displacement is twice the
    /// coherent amplitude in SNU).
    pub fn signal_photon_number(&self) -> f64 {
        0.25 * (self.s2 * self.s2 + self.s3 * self.s3)
    }
}

/// Two-state alphabet `±displacement` along Ŝ₂.
pub fn prepare_alphabet(displacement: f64) -> Result<[CoherentPolarizationState; 2]> {
    prepare_alphabet_with_lo(displacement, DEFAULT_LO_PHOTON_NUMBER)
}

pub fn prepare_alphabet_with_lo(
    displacement: f64,
    lo_photon_number: f64,
) -> Result<[CoherentPolarizationState; 2]> {
    ensure_non_negative("displacement", displacement)?;
    Ok([
        CoherentPolarizationState::new(lo_photon_number, displacement, 0.0)?,
        CoherentPolarizationState::new(lo_photon_number, -displacement, 0.0)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub transmittance: f64,
    /// Added Ŝ₂ variance at the channel output, SNU.
    pub excess_noise: f64,
}

impl ChannelParams {
    pub const IDENTITY: ChannelParams = ChannelParams {
        transmittance: 1.0,
        excess_noise: 0.0,
    };

    pub fn new(transmittance: f64, excess_noise: f64) -> Result<Self> {
        let p = Self {
            transmittance,
            excess_noise,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("transmittance", self.transmittance)?;
        if !(0.0..=1.0).contains(&self.transmittance) {
            return Err(Error::invalid(
                "transmittance",
                format!("must lie in [0, 1], got {}", self.transmittance),
            ));
        }
        ensure_non_negative("excess_noise", self.excess_noise)
    }
}

/// Sends a state through a channel: field amplitudes scale by √T, the LO by T,
/// and the noise above vacuum by T before the excess noise is added.
pub fn apply_channel(
    state: &CoherentPolarizationState,
    params: &ChannelParams,
) -> Result<CoherentPolarizationState> {
    params.validate()?;
    let t = params.transmittance;
    if t == 0.0 {
        return Err(Error::Degenerate("zero transmittance extinguishes the LO".into()));
    }
    let amp = t.sqrt();
    Ok(CoherentPolarizationState {
        lo_photon_number: state.lo_photon_number * t,
        s2: state.s2 * amp,
        s3: state.s3 * amp,
        variance: t * (state.variance - 1.0) + 1.0 + params.excess_noise,
    })
}

/// `n_shots` Ŝ₂ outcomes (SNU), deterministic in `(state, n_shots, seed)`.
pub fn measure_s2(state: &CoherentPolarizationState, n_shots: usize, seed: u64) -> Result<Vec<f64>> {
    measure_s2_stream(state, n_shots, seed, 0)
}

/// As [`measure_s2`], drawing from an independent numbered stream of `seed`.
pub fn measure_s2_stream(
    state: &CoherentPolarizationState,
    n_shots: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    if n_shots == 0 {
        return Err(Error::invalid("n_shots", "must be >= 1"));
    }
    let sd = state.variance.sqrt();
    Ok(rng::standard_normals(seed, Domain::Homodyne, stream, n_shots)
        .into_iter()
        .map(|z| state.s2 + sd * z)
        .collect())
}

/// Probability of mistaking one state of a `±displacement` alphabet for the
/// other with a sign decision: `Q(displacement / √variance)`.
pub fn discrimination_error(displacement: f64, variance: f64) -> Result<f64> {
    ensure_non_negative("displacement", displacement)?;
    ensure_positive("variance", variance)?;
    Ok(0.5 * libm::erfc(displacement / (2.0 * variance).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub resamples: usize,
    /// Two-sided confidence level of the percentile interval.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            resamples: 1000,
            confidence: 0.99,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessNoiseEstimate {
    pub epsilon: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

impl ExcessNoiseEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Minimum length of each sequence given to [`excess_noise_estimate`].
pub const MIN_SEQUENCE_LEN: usize = 100;

/// Broadening of the outcome distribution across the channel,
/// `var(after) / var(before) − 1`, with a percentile-bootstrap interval.
pub fn excess_noise_estimate(
    before: &[f64],
    after: &[f64],
    opts: &BootstrapOptions,
) -> Result<ExcessNoiseEstimate> {
    for (name, seq) in [("before", before), ("after", after)] {
        if seq.len() < MIN_SEQUENCE_LEN {
            return Err(Error::TooShort {
                required: MIN_SEQUENCE_LEN,
                actual: seq.len(),
            });
        }
        if let Some(v) = seq.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(name, format!("non-finite outcome {v}")));
        }
    }
    if opts.resamples < 2 {
        return Err(Error::invalid("resamples", "need at least 2"));
    }
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(Error::invalid("confidence", "must lie in (0, 1)"));
    }
    let vb = variance(before);
    let va = variance(after);
    if vb == 0.0 || va == 0.0 {
        return Err(Error::Degenerate("outcome sequence has zero variance".into()));
    }
    let epsilon = va / vb - 1.0;

    let mut ratios: Vec<f64> = (0..opts.resamples as u64)
        .map(|b| {
            let ib = rng::uniform_indices(opts.seed, Domain::Bootstrap, 2 * b, before.len(), before.len());
            let ia = rng::uniform_indices(opts.seed, Domain::Bootstrap, 2 * b + 1, after.len(), after.len());
            let rb = resampled_variance(before, &ib);
            let ra = resampled_variance(after, &ia);
            if rb == 0.0 {
                f64::INFINITY
            } else {
                ra / rb - 1.0
            }
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - opts.confidence);
    Ok(ExcessNoiseEstimate {
        epsilon,
        ci_low: quantile(&ratios, alpha),
        ci_high: quantile(&ratios, 1.0 - alpha),
        confidence: opts.confidence,
    })
}

/// Sample variance (n − 1 denominator).
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn resampled_variance(values: &[f64], idx: &[usize]) -> f64 {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| values[i]).sum::<f64>() / n;
    idx.iter().map(|&i| (values[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Equal-width histogram over `[lo, hi)`; returns `(bin_center, count)`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<(f64, u64)>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::invalid("histogram", "need bins >= 1 and hi > lo"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v >= lo && v < hi {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + (k as f64 + 0.5) * width, c))
        .collect())
}
