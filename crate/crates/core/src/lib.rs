//! Noise-budget simulation for a free-space continuous-variable quantum channel.
//!
//! The crate models Gaussian-beam clipping on a finite photodiode under
//! atmospheric beam-center wander, budgets the resulting intensity noise
//! against the shot-noise limit, simulates Stokes-homodyne state transmission,
//! emulates an RF spectrum analyzer, and analyzes beam-profile frames.

// `!(x > 0.0)` checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod budget;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod jitter;
pub mod profile;
pub mod quadrature;
pub mod reference;
pub mod stokes;
pub mod rng;
pub mod spectrum;

pub use beam::{clipped_power_fraction, intensity_at, CircularAperture, ClippedFraction, GaussianBeam, Point};
pub use error::{Error, Result};
pub use jitter::{center_stats, sample_centers, CenterSeries, CenterStats, JitterSpec, Scenario, ScenarioPreset};
