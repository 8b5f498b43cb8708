//! Polar group-velocity profiles and their binary raster images.

use std::fmt::Write as _;
use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{solve_modes, DispersionError, Laminate, ModeLabel, SweepConfig};
use crate::material::{Layup, Material};

/// Profile samples: 0°..=360° at 1°.
pub const PROFILE_LEN: usize = 361;
pub const DEFAULT_SIZE: usize = 64;
/// Longest run of consecutive angles that may be filled by interpolation.
pub const MAX_INTERPOLATED_RUN: usize = 3;

/// Default image half-width in m/s for a mode.
pub fn default_scale(mode: ModeLabel) -> f64 {
    match mode {
        ModeLabel::A0 => 3000.0,
        _ => 12000.0,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PolarError {
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error("polar profiles are defined for A0 and S0 only, not {0}")]
    UnsupportedMode(ModeLabel),
    #[error("{mode} unresolved at {count} consecutive angles starting at {start}° (f = {f} Hz)")]
    Unresolved { mode: ModeLabel, f: f64, start: usize, count: usize },
    #[error("scale {scale} m/s is below the profile maximum {max_cg} m/s")]
    ScaleTooSmall { scale: f64, max_cg: f64 },
    #[error("image size must be even and positive, got {0}")]
    BadSize(usize),
    #[error("profile must have {PROFILE_LEN} finite positive samples")]
    BadProfile,
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error("malformed profile CSV at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Which propagation angles are actually solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleCoverage {
    /// Solve the smallest angular sector the layup's symmetry allows and
    /// complete the rest by reflection and 180° periodicity.
    #[default]
    Symmetric,
    /// Solve all 360 angles independently.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PolarOptions {
    pub sweep: SweepConfig,
    pub coverage: AngleCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarProfile {
    pub mode: ModeLabel,
    /// Hz
    pub f: f64,
    /// degrees
    pub angles: Vec<f64>,
    /// m/s
    pub cg: Vec<f64>,
    /// Angles (degrees) whose value was interpolated from neighbours.
    pub interpolated: Vec<usize>,
}

impl PolarProfile {
    /// Closed profile from 360 samples at 0°..359°.
    pub fn from_samples(mode: ModeLabel, f: f64, samples: &[f64]) -> Result<PolarProfile, PolarError> {
        if samples.len() != PROFILE_LEN - 1 || samples.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PolarError::BadProfile);
        }
        let mut cg = samples.to_vec();
        cg.push(samples[0]);
        Ok(PolarProfile { mode, f, angles: (0..PROFILE_LEN).map(|a| a as f64).collect(), cg, interpolated: Vec::new() })
    }

    pub fn constant(mode: ModeLabel, f: f64, cg: f64) -> Result<PolarProfile, PolarError> {
        PolarProfile::from_samples(mode, f, &[cg; PROFILE_LEN - 1])
    }

    pub fn max_cg(&self) -> f64 {
        self.cg.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_cg(&self) -> f64 {
        self.cg.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max |cg(φ) − cg(360° − φ)| / max cg`.
    pub fn symmetry_defect(&self) -> f64 {
        let d = (0..PROFILE_LEN).map(|i| (self.cg[i] - self.cg[360 - i]).abs()).fold(0.0, f64::max);
        d / self.max_cg()
    }

    /// Linear interpolation at an arbitrary angle in degrees.
    pub fn at(&self, deg: f64) -> f64 {
        let a = deg.rem_euclid(360.0);
        let i = (a.floor() as usize).min(359);
        let t = a - i as f64;
        self.cg[i] + t * (self.cg[i + 1] - self.cg[i])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("angle_deg,cg_mps\n");
        for (a, v) in self.angles.iter().zip(&self.cg) {
            writeln!(s, "{a},{v}").unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), PolarError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Reads the two-column CSV back. Mode and frequency are not stored in
    /// the file and must be supplied.
    pub fn read_csv(path: impl AsRef<Path>, mode: ModeLabel, f: f64) -> Result<PolarProfile, PolarError> {
        let file = io::BufReader::new(std::fs::File::open(path)?);
        let mut angles = Vec::new();
        let mut cg = Vec::new();
        for (i, line) in file.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            if i == 0 {
                if line.trim() != "angle_deg,cg_mps" {
                    return Err(PolarError::Csv { line: n, msg: format!("unexpected header `{line}`") });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (a, v) = line.split_once(',').ok_or(PolarError::Csv { line: n, msg: "expected two columns".into() })?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| PolarError::Csv { line: n, msg: e.to_string() });
            angles.push(parse(a)?);
            cg.push(parse(v)?);
        }
        if cg.len() != PROFILE_LEN {
            return Err(PolarError::BadProfile);
        }
        Ok(PolarProfile { mode, f, angles, cg, interpolated: Vec::new() })
    }
}

fn check_mode(mode: ModeLabel) -> Result<(), PolarError> {
    match mode {
        ModeLabel::A0 | ModeLabel::S0 => Ok(()),
        other => Err(PolarError::UnsupportedMode(other)),
    }
}

/// Single-mode convenience wrapper around [`polar_profiles`].
pub fn polar_profile(
    material: &Material,
    layup: &Layup,
    f: f64,
    mode: ModeLabel,
    opts: &PolarOptions,
) -> Result<PolarProfile, PolarError> {
    Ok(polar_profiles(material, layup, f, &[mode], opts)?.remove(0))
}

/// Group-velocity profiles of several modes from one modal sweep per angle.
pub fn polar_profiles(
    material: &Material,
    layup: &Layup,
    f: f64,
    modes: &[ModeLabel],
    opts: &PolarOptions,
) -> Result<Vec<PolarProfile>, PolarError> {
    for &m in modes {
        check_mode(m)?;
    }
    opts.sweep.validate()?;
    // Fail early on bad material or frequency rather than once per angle.
    Laminate::new(material, layup, 0.0)?;
    if !(f > 0.0 && f.is_finite()) {
        return Err(DispersionError::BadFrequency(f).into());
    }

    let solved: Vec<usize> = match opts.coverage {
        AngleCoverage::Full => (0..360).collect(),
        AngleCoverage::Symmetric if layup.is_reflection_invariant() => (0..=90).collect(),
        AngleCoverage::Symmetric => (0..180).collect(),
    };
    let rows: Vec<Vec<Option<f64>>> = solved
        .par_iter()
        .map(|&deg| {
            let lam = Laminate::new(material, layup, (deg as f64).to_radians())?;
            let pts = solve_modes(&lam, f, &opts.sweep, modes)?;
            Ok(modes
                .iter()
                .map(|&m| pts.iter().find(|p| p.label == Some(m)).and_then(|p| p.cg).filter(|v| v.is_finite() && *v > 0.0))
                .collect())
        })
        .collect::<Result<_, DispersionError>>()?;

    modes
        .iter()
        .enumerate()
        .map(|(k, &mode)| {
            let mut full = [None; 360];
            for (&deg, row) in solved.iter().zip(&rows) {
                full[deg] = row[k];
            }
            match opts.coverage {
                AngleCoverage::Full => {}
                AngleCoverage::Symmetric if solved.len() == 91 => {
                    for d in 91..360 {
                        full[d] = if d <= 180 { full[180 - d] } else { full[360 - d] };
                    }
                }
                AngleCoverage::Symmetric => {
                    for d in 180..360 {
                        full[d] = full[d - 180];
                    }
                }
            }
            let (samples, interpolated) = fill_gaps(&full).map_err(|(start, count)| PolarError::Unresolved {
                mode,
                f,
                start,
                count,
            })?;
            let mut p = PolarProfile::from_samples(mode, f, &samples)?;
            p.interpolated = interpolated;
            Ok(p)
        })
        .collect()
}

/// Fills short runs of missing angles by linear interpolation around the
/// circle. Returns the first offending run `(start, length)` on failure.
fn fill_gaps(full: &[Option<f64>; 360]) -> Result<(Vec<f64>, Vec<usize>), (usize, usize)> {
    let Some(anchor) = full.iter().position(Option::is_some) else {
        return Err((0, 360));
    };
    let mut out: Vec<f64> = full.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let mut filled = Vec::new();
    // Walk once around the circle starting from a known value.
    let mut last = anchor;
    for step in 1..=360 {
        let i = (anchor + step) % 360;
        if full[i].is_none() {
            continue;
        }
        let gap = (i + 360 - last) % 360;
        let gap = if gap == 0 { 360 } else { gap };
        if gap > 1 {
            let count = gap - 1;
            if count > MAX_INTERPOLATED_RUN {
                return Err(((last + 1) % 360, count));
            }
            let (a, b) = (full[last].unwrap(), full[i].unwrap());
            for j in 1..gap {
                let idx = (last + j) % 360;
                out[idx] = a + (b - a) * j as f64 / gap as f64;
                filled.push(idx);
            }
        }
        last = i;
    }
    filled.sort_unstable();
    Ok((out, filled))
}

/// Square binary image, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    /// 0 or 1
    pub pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> BinaryImage {
        BinaryImage { width, height, pixels: vec![0; width * height] }
    }

    pub fn filled(width: usize, height: usize) -> BinaryImage {
        BinaryImage { width, height, pixels: vec![1; width * height] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.pixels[row * self.width + col] = v as u8;
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().map(|&p| p as usize).sum()
    }

    pub fn flip_horizontal(&self) -> BinaryImage {
        let mut out = self.clone();
        for r in 0..self.height {
            for c in 0..self.width {
                out.pixels[r * self.width + c] = self.get(r, self.width - 1 - c);
            }
        }
        out
    }

    pub fn flip_vertical(&self) -> BinaryImage {
        let mut out = self.clone();
        for r in 0..self.height {
            out.pixels[r * self.width..(r + 1) * self.width]
                .copy_from_slice(&self.pixels[(self.height - 1 - r) * self.width..(self.height - r) * self.width]);
        }
        out
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&p| if p != 0 { 255u8 } else { 0 }));
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), PolarError> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_pgm())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<BinaryImage, PolarError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        BinaryImage::from_pgm(&bytes)
    }

    /// Parses a P5 file whose samples are all 0 or 255.
    pub fn from_pgm(bytes: &[u8]) -> Result<BinaryImage, PolarError> {
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
                return Err(PolarError::Pgm("truncated header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        if fields[0] != "P5" {
            return Err(PolarError::Pgm(format!("bad magic `{}`", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| PolarError::Pgm(format!("bad number `{s}`")));
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(PolarError::Pgm(format!("maxval must be 255, got {maxval}")));
        }
        let data = bytes.get(pos..).unwrap_or(&[]);
        if data.len() != width * height {
            return Err(PolarError::Pgm(format!("expected {} raster bytes, found {}", width * height, data.len())));
        }
        let pixels = data
            .iter()
            .map(|&b| match b {
                0 => Ok(0),
                255 => Ok(1),
                other => Err(PolarError::Pgm(format!("non-binary sample {other}"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(BinaryImage { width, height, pixels })
    }
}

/// Fills every pixel whose centre lies within the profile curve, with
/// `scale` m/s mapped to half the image width. The four pixels touching the
/// centre are always set.
pub fn rasterize(profile: &PolarProfile, scale: f64, size: usize) -> Result<BinaryImage, PolarError> {
    if size == 0 || size % 2 != 0 {
        return Err(PolarError::BadSize(size));
    }
    if profile.cg.len() != PROFILE_LEN || profile.cg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(PolarError::BadProfile);
    }
    let max_cg = profile.max_cg();
    if !(scale.is_finite() && scale >= max_cg && scale > 0.0) {
        return Err(PolarError::ScaleTooSmall { scale, max_cg });
    }
    let half = size as f64 / 2.0;
    let px_per_mps = half / scale;
    let mut img = BinaryImage::new(size, size);
    for r in 0..size {
        let y = half - (r as f64 + 0.5);
        for c in 0..size {
            let x = c as f64 + 0.5 - half;
            let radius = x.hypot(y);
            let deg = y.atan2(x).to_degrees();
            let inside = radius <= profile.at(deg) * px_per_mps;
            img.set(r, c, inside);
        }
    }
    let m = size / 2;
    for (r, c) in [(m - 1, m - 1), (m - 1, m), (m, m - 1), (m, m)] {
        img.set(r, c, true);
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryScore {
    pub score: f64,
    /// The image had no set pixels.
    pub empty: bool,
}

/// Intersection over union of the image with the intersection of its left-right
/// and top-bottom mirror images.
pub fn symmetry_score(img: &BinaryImage) -> SymmetryScore {
    if img.count() == 0 {
        return SymmetryScore { score: 0.0, empty: true };
    }
    let h = img.flip_horizontal();
    let v = img.flip_vertical();
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..img.pixels.len() {
        let a = img.pixels[i] != 0;
        let b = h.pixels[i] != 0 && v.pixels[i] != 0;
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    SymmetryScore { score: inter as f64 / union as f64, empty: false }
}
