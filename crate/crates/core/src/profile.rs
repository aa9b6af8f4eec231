//! Beam-profile frames: centroid and D4σ moments, sequence statistics,
//! synthetic frames and file interchange.
//!
//! Pixel `(i, j)` (column, row) has its center at `(i · pitch, j · pitch)` mm.
//! Values are stored row-major.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::beam::{intensity_at, GaussianBeam, Point};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::io;
use crate::jitter::{center_stats, CenterSeries, CenterStats};
use crate::reference;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    pub width: usize,
    pub height: usize,
    /// mm per pixel
    pub pixel_pitch: f64,
    /// seconds
    pub exposure: f64,
}

impl Default for FrameGeometry {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            pixel_pitch: 0.02,
            exposure: reference::EXPOSURE_S,
        }
    }
}

impl FrameGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.width * self.height < 4 {
            return Err(Error::invalid("geometry", "frame needs at least 4 pixels"));
        }
        ensure_positive("pixel_pitch", self.pixel_pitch)?;
        ensure_non_negative("exposure", self.exposure)
    }

    /// Center of the pixel grid (mm).
    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.width - 1) as f64 * self.pixel_pitch,
            0.5 * (self.height - 1) as f64 * self.pixel_pitch,
        )
    }

    fn contains(&self, p: Point) -> bool {
        let xmax = (self.width - 1) as f64 * self.pixel_pitch;
        let ymax = (self.height - 1) as f64 * self.pixel_pitch;
        (0.0..=xmax).contains(&p.x) && (0.0..=ymax).contains(&p.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    geometry: FrameGeometry,
    values: Vec<f64>,
}

impl Frame {
    pub fn new(geometry: FrameGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.width * geometry.height {
            return Err(Error::invalid(
                "values",
                format!(
                    "expected {}x{} = {} values, got {}",
                    geometry.width,
                    geometry.height,
                    geometry.width * geometry.height,
                    values.len()
                ),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("values", format!("pixel value {v} is negative or non-finite")));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.geometry.width + col]
    }

    pub fn scaled(&self, k: f64) -> Result<Frame> {
        Frame::new(self.geometry, self.values.iter().map(|v| v * k).collect())
    }
}

/// Constant offset removed from a frame before moments are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Background {
    None,
    /// Median of the one-pixel border ring.
    #[default]
    BorderMedian,
    /// Median of the pixels in the lowest decile of values.
    LowestDecileMedian,
}

impl std::str::FromStr for Background {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Background::None),
            "border_median" => Ok(Background::BorderMedian),
            "lowest_decile_median" => Ok(Background::LowestDecileMedian),
            other => Err(Error::Config(format!(
                "unknown background mode `{other}` (none, border_median, lowest_decile_median)"
            ))),
        }
    }
}

impl Background {
    pub fn estimate(self, frame: &Frame) -> f64 {
        match self {
            Background::None => 0.0,
            Background::BorderMedian => {
                let g = frame.geometry;
                let mut ring: Vec<f64> = Vec::with_capacity(2 * (g.width + g.height));
                for row in 0..g.height {
                    for col in 0..g.width {
                        if row == 0 || col == 0 || row + 1 == g.height || col + 1 == g.width {
                            ring.push(frame.get(col, row));
                        }
                    }
                }
                median(&mut ring)
            }
            Background::LowestDecileMedian => {
                let mut v = frame.values.clone();
                v.sort_by(f64::total_cmp);
                let k = (v.len() / 10).max(1);
                median(&mut v[..k].to_vec())
            }
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub total: f64,
    pub centroid: Point,
    /// Second central moments per axis (mm²).
    pub var_x: f64,
    pub var_y: f64,
}

impl Moments {
    /// D4σ diameters `(dx, dy)` in mm.
    pub fn d4sigma(&self) -> (f64, f64) {
        (4.0 * self.var_x.max(0.0).sqrt(), 4.0 * self.var_y.max(0.0).sqrt())
    }
}

/// First and second intensity moments after background removal.
pub fn moments(frame: &Frame, background: Background) -> Result<Moments> {
    let g = frame.geometry;
    let bg = background.estimate(frame);
    let mut total = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for row in 0..g.height {
        for col in 0..g.width {
            let v = frame.get(col, row) - bg;
            total += v;
            sx += v * col as f64;
            sy += v * row as f64;
        }
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("frame has no positive intensity above background".into()));
    }
    let (cx, cy) = (sx / total, sy / total);
    let (mut vx, mut vy) = (0.0, 0.0);
    for row in 0..g.height {
        for col in 0..g.width {
            let v = frame.get(col, row) - bg;
            vx += v * (col as f64 - cx).powi(2);
            vy += v * (row as f64 - cy).powi(2);
        }
    }
    let p = g.pixel_pitch;
    Ok(Moments {
        total,
        centroid: Point::new(cx * p, cy * p),
        var_x: vx / total * p * p,
        var_y: vy / total * p * p,
    })
}

/// Intensity-weighted centroid (mm) with the default background handling.
pub fn centroid(frame: &Frame) -> Result<Point> {
    Ok(moments(frame, Background::default())?.centroid)
}

/// D4σ diameters `(dx, dy)` in mm with the default background handling.
pub fn d4sigma_diameter(frame: &Frame) -> Result<(f64, f64)> {
    Ok(moments(frame, Background::default())?.d4sigma())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    /// Frame rate the statistics are attributed to (Hz).
    frame_rate: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, frame_rate: f64) -> Result<Self> {
        ensure_positive("frame_rate", frame_rate)?;
        if let Some(first) = frames.first() {
            let g0 = first.geometry;
            for (i, f) in frames.iter().enumerate().skip(1) {
                let g = f.geometry;
                if g.width != g0.width || g.height != g0.height {
                    return Err(Error::GeometryMismatch {
                        index: i,
                        reason: format!("{}x{} vs {}x{}", g.width, g.height, g0.width, g0.height),
                    });
                }
                if g.pixel_pitch != g0.pixel_pitch {
                    return Err(Error::GeometryMismatch {
                        index: i,
                        reason: format!("pitch {} vs {}", g.pixel_pitch, g0.pixel_pitch),
                    });
                }
            }
        }
        Ok(Self { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAnalysis {
    /// Raw centroids (mm).
    pub centers: CenterSeries,
    /// Centroids with their mean shifted to the origin.
    pub shifted: Vec<Point>,
    /// Per-frame D4σ diameters `(dx, dy)` in mm.
    pub diameters: Vec<(f64, f64)>,
    pub stats: CenterStats,
    /// Mean of the per-frame D4σ diameters.
    pub mean_diameter: (f64, f64),
}

impl SequenceAnalysis {
    pub const CSV_HEADER: &'static str = "index,cx_mm,cy_mm,dx_mm,dy_mm";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, (c, d)) in self.centers.points().iter().zip(&self.diameters).enumerate() {
            let _ = writeln!(out, "{i},{:.9e},{:.9e},{:.9e},{:.9e}", c.x, c.y, d.0, d.1);
        }
        out
    }

    /// Sample standard deviation of the per-frame mean diameter `(dx + dy) / 2`.
    pub fn diameter_std(&self) -> f64 {
        let d: Vec<f64> = self.diameters.iter().map(|(x, y)| 0.5 * (x + y)).collect();
        crate::stokes::variance(&d).sqrt()
    }
}

pub fn analyze_sequence(seq: &FrameSequence, background: Background) -> Result<SequenceAnalysis> {
    if seq.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: seq.len(),
        });
    }
    let per_frame: Vec<Moments> = seq
        .frames
        .par_iter()
        .map(|f| moments(f, background))
        .collect::<Result<_>>()?;
    let centers = CenterSeries::new(per_frame.iter().map(|m| m.centroid).collect(), seq.frame_rate)?;
    let stats = center_stats(&centers)?;
    let diameters: Vec<(f64, f64)> = per_frame.iter().map(Moments::d4sigma).collect();
    let n = diameters.len() as f64;
    let mean_diameter = diameters
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    Ok(SequenceAnalysis {
        shifted: centers.mean_shifted(),
        centers,
        diameters,
        stats,
        mean_diameter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distortion {
    #[default]
    None,
    /// Smooth random multiplicative envelope resembling the break-up seen
    /// with an open hatch. Qualitative only.
    Hatch,
}

impl std::str::FromStr for Distortion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Distortion::None),
            "hatch" => Ok(Distortion::Hatch),
            other => Err(Error::Config(format!("unknown distortion `{other}` (none, hatch)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisParams {
    /// Additive readout noise std, in the same units as the intensity.
    pub noise: f64,
    /// Camera bias added to every pixel so values stay non-negative.
    /// `None` uses ten times the readout noise.
    pub pedestal: Option<f64>,
    pub distortion: Distortion,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            noise: 0.0,
            pedestal: None,
            distortion: Distortion::None,
        }
    }
}

/// Modes of the hatch envelope.
const HATCH_MODES: usize = 8;
/// Log-amplitude std of each hatch mode.
const HATCH_STRENGTH: f64 = 0.35;

/// Samples `beam` (center in frame coordinates, mm) at the pixel centers and
/// adds the pedestal, readout noise and optional distortion.
pub fn synthesize_frame(
    beam: &GaussianBeam,
    geometry: &FrameGeometry,
    params: &SynthesisParams,
    seed: u64,
) -> Result<Frame> {
    synthesize_indexed(beam, geometry, params, seed, 0)
}

fn synthesize_indexed(
    beam: &GaussianBeam,
    geometry: &FrameGeometry,
    params: &SynthesisParams,
    seed: u64,
    index: u64,
) -> Result<Frame> {
    geometry.validate()?;
    ensure_non_negative("noise", params.noise)?;
    let pedestal = params.pedestal.unwrap_or(10.0 * params.noise);
    ensure_non_negative("pedestal", pedestal)?;
    if !geometry.contains(beam.center()) {
        return Err(Error::invalid(
            "beam",
            format!(
                "center ({:.4}, {:.4}) mm lies outside the frame",
                beam.center().x,
                beam.center().y
            ),
        ));
    }
    let n = geometry.width * geometry.height;
    let envelope = match params.distortion {
        Distortion::None => None,
        Distortion::Hatch => Some(hatch_envelope(beam, seed, index)),
    };
    let noise = if params.noise > 0.0 {
        rng::standard_normals(seed, Domain::FrameNoise, index, n)
    } else {
        Vec::new()
    };
    let p = geometry.pixel_pitch;
    let values = (0..n)
        .map(|k| {
            let pt = Point::new((k % geometry.width) as f64 * p, (k / geometry.width) as f64 * p);
            let mut v = intensity_at(beam, pt);
            if let Some(env) = &envelope {
                v *= env.at(pt);
            }
            v += pedestal;
            if let Some(z) = noise.get(k) {
                v += params.noise * z;
            }
            v.max(0.0)
        })
        .collect();
    Frame::new(*geometry, values)
}

struct Envelope {
    modes: Vec<(f64, f64, f64, f64)>,
}

impl Envelope {
    fn at(&self, p: Point) -> f64 {
        self.modes
            .iter()
            .map(|&(kx, ky, phase, amp)| amp * (kx * p.x + ky * p.y + phase).cos())
            .sum::<f64>()
            .exp()
    }
}

/// Random wave vectors at scales from about a beam radius down to a quarter
/// of it.
fn hatch_envelope(beam: &GaussianBeam, seed: u64, index: u64) -> Envelope {
    let mut r = rng::block_rng(seed, Domain::FrameDistortion, index, 0);
    let w = beam.radius();
    let modes = (0..HATCH_MODES)
        .map(|_| {
            let k = r.gen_range(1.0..4.0) * std::f64::consts::PI / w;
            let dir = r.gen_range(0.0..std::f64::consts::TAU);
            let phase = r.gen_range(0.0..std::f64::consts::TAU);
            let amp = HATCH_STRENGTH * r.gen_range(-1.0..1.0_f64) * 3f64.sqrt();
            (k * dir.cos(), k * dir.sin(), phase, amp)
        })
        .collect();
    Envelope { modes }
}

/// One frame per center of `centers`, each with its own noise and distortion
/// streams. `centers` are offsets from the frame center.
pub fn synthesize_sequence(
    beam: &GaussianBeam,
    centers: &CenterSeries,
    geometry: &FrameGeometry,
    params: &SynthesisParams,
    seed: u64,
) -> Result<FrameSequence> {
    let mid = geometry.center();
    let frames = centers
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let b = beam.with_center(Point::new(mid.x + c.x, mid.y + c.y))?;
            synthesize_indexed(&b, geometry, params, seed, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, centers.sample_rate())
}

/// Path of the sidecar header belonging to a frame file.
pub fn sidecar_path(frame_path: &Path) -> PathBuf {
    frame_path.with_extension("hdr")
}

/// Encodes a frame as a 16-bit binary PGM plus its sidecar header text.
/// Values are scaled so the brightest pixel maps to 65535; the scale is
/// recorded in the sidecar.
pub fn encode_pgm(frame: &Frame) -> (Vec<u8>, String) {
    let g = frame.geometry;
    let max = frame.values.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { max / 65535.0 } else { 1.0 };
    let mut bytes = format!("P5\n{} {}\n65535\n", g.width, g.height).into_bytes();
    bytes.reserve(2 * frame.values.len());
    for v in &frame.values {
        let q = (v / scale).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    let sidecar = format!(
        "pixel_pitch_mm={:e}\nexposure_s={:e}\nintensity_scale={:e}\n",
        g.pixel_pitch, g.exposure, scale
    );
    (bytes, sidecar)
}

/// Writes a frame as PGM with its sidecar header next to it.
pub fn write_pgm(frame: &Frame, path: &Path) -> Result<()> {
    let (bytes, sidecar) = encode_pgm(frame);
    io::write_atomic(path, &bytes)?;
    io::write_atomic(&sidecar_path(path), sidecar.as_bytes())
}

struct Sidecar {
    pixel_pitch: f64,
    exposure: f64,
    scale: f64,
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = io::read_to_string(path)?;
    let fmt = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| fmt(format!("expected key=value, got `{line}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| fmt(format!("`{}` is not a number", v.trim())))?;
        kv.insert(k.trim().to_string(), v);
    }
    let pixel_pitch = *kv
        .get("pixel_pitch_mm")
        .ok_or_else(|| fmt("missing pixel_pitch_mm".into()))?;
    Ok(Sidecar {
        pixel_pitch,
        exposure: kv.get("exposure_s").copied().unwrap_or(reference::EXPOSURE_S),
        scale: kv.get("intensity_scale").copied().unwrap_or(1.0),
    })
}

/// Reads a binary PGM (8- or 16-bit) with its sidecar header.
pub fn read_pgm(path: &Path) -> Result<Frame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(fmt("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| fmt("non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(fmt("not a binary PGM (P5)"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| fmt("bad header number"));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(fmt("maxval out of range"));
    }
    pos += 1; // single whitespace after maxval
    let bpp = if maxval > 255 { 2 } else { 1 };
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() < width * height * bpp {
        return Err(fmt("truncated pixel data"));
    }
    let side = read_sidecar(&sidecar_path(path))?;
    let values = (0..width * height)
        .map(|k| {
            let raw = if bpp == 2 {
                u16::from_be_bytes([data[2 * k], data[2 * k + 1]]) as f64
            } else {
                data[k] as f64
            };
            raw * side.scale
        })
        .collect();
    Frame::new(
        FrameGeometry {
            width,
            height,
            pixel_pitch: side.pixel_pitch,
            exposure: side.exposure,
        },
        values,
    )
}

/// Reads a comma-separated intensity grid (one row per line) with its
/// sidecar header.
pub fn read_csv_grid(path: &Path) -> Result<Frame> {
    let text = io::read_to_string(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format {
                path: path.to_path_buf(),
                reason: format!("line {}: non-numeric cell", ln + 1),
            })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: format!("line {}: {} cells, expected {w}", ln + 1, row.len()),
                })
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let side = read_sidecar(&sidecar_path(path))?;
    Frame::new(
        FrameGeometry {
            width: width.unwrap_or(0),
            height,
            pixel_pitch: side.pixel_pitch,
            exposure: side.exposure,
        },
        values.into_iter().map(|v| v * side.scale).collect(),
    )
}

/// Reads a frame by extension (`.pgm` or `.csv`).
pub fn read_frame(path: &Path) -> Result<Frame> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path),
        Some("csv") => read_csv_grid(path),
        _ => Err(Error::Format {
            path: path.to_path_buf(),
            reason: "expected a .pgm or .csv frame".into(),
        }),
    }
}

/// Loads every `.pgm`/`.csv` frame of a directory in file-name order.
pub fn load_sequence(dir: &Path, frame_rate: f64) -> Result<FrameSequence> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "csv")))
        .collect();
    paths.sort();
    let frames = paths.iter().map(|p| read_frame(p)).collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, frame_rate)
}
