//! Modal solutions of a free laminate: phase-velocity root finding on the
//! SMM characteristic function, mode labelling by shape and group velocity by
//! a central difference of `ω(k)`.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::material::{
    rotate_stiffness, stiffness_from_engineering, to_tensor, Layup, Material, MaterialError, RotatedStiffness,
    StiffnessMatrix,
};
use crate::smm::{
    assemble_global, characteristic, characteristic_magnitude, layer_stiffness, partial_waves, GlobalStiffness,
    LayerStiffness, WaveState, C64,
};

/// A sign change is a root only if `|det|` at the refined point is below this
/// fraction of the larger bracket-endpoint magnitude; otherwise it is a pole.
pub const POLE_REJECTION_RATIO: f64 = 1e-4;

/// Relative cp resolution the bisection continues to past `bisection_tol`,
/// so that finite differences of cp stay accurate.
const BISECTION_REL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeLabel {
    A0,
    S0,
    SH0,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeLabel::A0 => "A0",
            ModeLabel::S0 => "S0",
            ModeLabel::SH0 => "SH0",
        })
    }
}

impl std::str::FromStr for ModeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A0" => Ok(ModeLabel::A0),
            "S0" => Ok(ModeLabel::S0),
            "SH0" => Ok(ModeLabel::SH0),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Symmetry of the face displacements about the midplane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// `u1, u2` even and `u3` odd through the thickness (S0, SH0).
    Symmetric,
    /// `u1, u2` odd and `u3` even (A0).
    Antisymmetric,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeShape {
    /// `|u1|, |u2|, |u3|` at the top face, unit norm.
    pub top: [f64; 3],
    /// Energy fractions of the three components over both faces.
    pub energy: [f64; 3],
    /// `u3` has the same sign on both faces.
    pub u3_symmetric: bool,
    pub parity: Parity,
}

impl ModeShape {
    pub fn from_faces(bottom: &Vector3<C64>, top: &Vector3<C64>) -> ModeShape {
        let tn = top.norm().max(f64::MIN_POSITIVE);
        let top_mag = [top[0].norm() / tn, top[1].norm() / tn, top[2].norm() / tn];
        let e: [f64; 3] = std::array::from_fn(|i| top[i].norm_sqr() + bottom[i].norm_sqr());
        let total = e.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let energy = e.map(|x| x / total);

        let anti = Vector3::new(-bottom[0], -bottom[1], bottom[2]);
        let sym = Vector3::new(bottom[0], bottom[1], -bottom[2]);
        let r_anti = (top - anti).norm();
        let r_sym = (top - sym).norm();
        let size = top.norm() + bottom.norm();
        let parity = if r_anti < 0.1 * size && r_anti < r_sym {
            Parity::Antisymmetric
        } else if r_sym < 0.1 * size && r_sym < r_anti {
            Parity::Symmetric
        } else {
            Parity::Mixed
        };
        let u3_symmetric = (top[2] * bottom[2].conj()).re >= 0.0;
        ModeShape { top: top_mag, energy, u3_symmetric, parity }
    }

    /// Share of in-plane energy carried along the propagation direction.
    pub fn longitudinal_fraction(&self) -> f64 {
        let inplane = self.energy[0] + self.energy[1];
        if inplane > 0.0 {
            self.energy[0] / inplane
        } else {
            0.0
        }
    }

    fn dominant_fraction(&self) -> f64 {
        self.energy.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePoint {
    /// Hz
    pub f: f64,
    /// radians
    pub prop_angle: f64,
    /// m/s
    pub cp: f64,
    /// m/s, set by [`group_velocity`]
    pub cg: Option<f64>,
    pub label: Option<ModeLabel>,
    pub shape: ModeShape,
    /// Label came from the cp-order fallback.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub cp_min: f64,
    pub cp_max: f64,
    pub coarse_step: f64,
    pub bisection_tol: f64,
    pub group_velocity_df: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { cp_min: 50.0, cp_max: 12000.0, coarse_step: 10.0, bisection_tol: 0.01, group_velocity_df: 0.005 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DispersionError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("invalid sweep configuration: {0}")]
    BadConfig(&'static str),
    #[error("frequency must be positive and finite, got {0}")]
    BadFrequency(f64),
    #[error("laminate has no plies")]
    EmptyLayup,
    #[error("mode point has no label")]
    Unlabeled,
    #[error("{mode} lost on both sides of {f} Hz at cp = {cp} m/s")]
    ModeLost { mode: ModeLabel, f: f64, cp: f64 },
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), DispersionError> {
        if !(self.cp_min > 0.0 && self.cp_min < self.cp_max) {
            return Err(DispersionError::BadConfig("need 0 < cp_min < cp_max"));
        }
        if !(self.coarse_step > 0.0) {
            return Err(DispersionError::BadConfig("coarse_step must be positive"));
        }
        if !(self.bisection_tol > 0.0) {
            return Err(DispersionError::BadConfig("bisection_tol must be positive"));
        }
        if !(self.group_velocity_df > 0.0 && self.group_velocity_df < 0.5) {
            return Err(DispersionError::BadConfig("group_velocity_df must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// A laminate seen from one propagation direction: every ply's stiffness is
/// pre-rotated into the wave frame and equal neighbouring plies are merged.
#[derive(Debug, Clone)]
pub struct Laminate {
    rho: f64,
    orientations: Vec<RotatedStiffness>,
    /// (orientation index, thickness), bottom to top.
    layers: Vec<(usize, f64)>,
    modulus_scale: f64,
    bulk_bound: f64,
    pub prop_angle: f64,
}

/// Fastest bulk wave over in-plane directions, from the Christoffel eigenvalues.
fn fastest_bulk_velocity(c: &StiffnessMatrix, rho: f64) -> f64 {
    let t = to_tensor(&c.c);
    (0..180)
        .map(|deg| {
            let (s, co) = (deg as f64).to_radians().sin_cos();
            let n = [co, s, 0.0];
            let g = Matrix3::from_fn(|i, k| {
                let mut v = 0.0;
                for j in 0..3 {
                    for l in 0..3 {
                        v += t[i][j][k][l] * n[j] * n[l];
                    }
                }
                v
            });
            g.symmetric_eigenvalues().max()
        })
        .fold(0.0, f64::max)
        .max(0.0)
        .sqrt()
        / rho.sqrt()
}

impl Laminate {
    pub fn new(material: &Material, layup: &Layup, prop_angle: f64) -> Result<Laminate, DispersionError> {
        if layup.ply_angles.is_empty() {
            return Err(DispersionError::EmptyLayup);
        }
        let c = stiffness_from_engineering(material)?;
        let mut angles: Vec<f64> = Vec::new();
        let mut orientations = Vec::new();
        let mut layers = Vec::new();
        for (ply_deg, thickness) in layup.merged_layers() {
            let idx = match angles.iter().position(|&a| a == ply_deg) {
                Some(i) => i,
                None => {
                    angles.push(ply_deg);
                    orientations.push(rotate_stiffness(&c, ply_deg.to_radians() - prop_angle)?);
                    angles.len() - 1
                }
            };
            layers.push((idx, thickness));
        }
        let modulus_scale = c.c.abs().max();
        let bulk_bound = fastest_bulk_velocity(&c, material.rho);
        Ok(Laminate { rho: material.rho, orientations, layers, modulus_scale, bulk_bound, prop_angle })
    }

    pub fn layer_stiffnesses(&self, f: f64, cp: f64) -> Vec<LayerStiffness> {
        let state = WaveState::new(f, cp, self.prop_angle);
        let waves: Vec<_> = self.orientations.iter().map(|c| partial_waves(c, self.rho, cp)).collect();
        self.layers.iter().map(|&(i, h)| layer_stiffness(&waves[i], &state, h)).collect()
    }

    pub fn global_stiffness(&self, f: f64, cp: f64) -> GlobalStiffness {
        assemble_global(&self.layer_stiffnesses(f, cp))
    }

    /// Positive normalizer for the determinant at this (f, cp).
    pub fn scale(&self, f: f64, cp: f64) -> f64 {
        WaveState::new(f, cp, self.prop_angle).xi * self.modulus_scale
    }

    pub fn characteristic(&self, f: f64, cp: f64) -> f64 {
        characteristic(&self.global_stiffness(f, cp), self.scale(f, cp))
    }

    pub fn magnitude(&self, f: f64, cp: f64) -> f64 {
        characteristic_magnitude(&self.global_stiffness(f, cp), self.scale(f, cp))
    }

    /// Fastest bulk wave the ply material supports in any in-plane direction.
    pub fn max_bulk_velocity(&self) -> f64 {
        self.bulk_bound
    }

    /// Face displacements `(bottom, top)` of the free-plate mode at a root.
    pub fn mode_shape(&self, f: f64, cp: f64) -> ModeShape {
        let k = self.global_stiffness(f, cp).k;
        let svd = k.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let idx = svd.singular_values.imin();
        let v: Vec<C64> = vt.row(idx).iter().map(|z| z.conj()).collect();
        let bottom = Vector3::new(v[0], v[1], v[2]);
        let top = Vector3::new(v[3], v[4], v[5]);
        ModeShape::from_faces(&bottom, &top)
    }
}

/// Result of a bracketing refinement.
#[derive(Debug, Clone, Copy)]
struct Refined {
    cp: f64,
    is_root: bool,
}

/// Bisects a sign change in `[lo, hi]` and classifies it as root or pole.
///
/// The reference magnitude for the pole test is taken at the ends of a
/// bracket at least one coarse step wide, so narrow tracking brackets are
/// judged on the same scale as the coarse sweep.
fn bisect(lam: &Laminate, f: f64, mut lo: f64, mut flo: f64, mut hi: f64, cfg: &SweepConfig) -> Refined {
    let half = 0.5 * cfg.coarse_step.max(hi - lo);
    let centre = 0.5 * (lo + hi);
    let end_mag = lam.magnitude(f, centre - half).max(lam.magnitude(f, centre + half));
    let tol = cfg.bisection_tol.min(BISECTION_REL_FLOOR * hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = lam.characteristic(f, mid);
        if fm.is_nan() {
            break;
        }
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let cp = 0.5 * (lo + hi);
    let mag = lam.magnitude(f, cp);
    Refined { cp, is_root: mag.is_finite() && mag < POLE_REJECTION_RATIO * end_mag }
}

fn validate_inputs(f: f64, cfg: &SweepConfig) -> Result<(), DispersionError> {
    cfg.validate()?;
    if !(f > 0.0 && f.is_finite()) {
        return Err(DispersionError::BadFrequency(f));
    }
    Ok(())
}

/// Outcome of a phase-velocity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSweep {
    /// Lowest accepted roots, ascending cp, labels unset.
    pub points: Vec<ModePoint>,
    /// Sign changes rejected as poles.
    pub rejected_poles: usize,
    /// Largest `|characteristic|` on the coarse grid.
    pub coarse_max: f64,
}

impl ModalSweep {
    /// Fewer than the three fundamental modes were found.
    pub fn is_partial(&self) -> bool {
        self.points.len() < 3
    }
}

/// Coarse scan plus bisection over `[cp_min, cp_max]`, keeping the lowest three roots.
pub fn find_modal_velocities(
    material: &Material,
    layup: &Layup,
    f: f64,
    prop_angle: f64,
    cfg: &SweepConfig,
) -> Result<ModalSweep, DispersionError> {
    validate_inputs(f, cfg)?;
    let lam = Laminate::new(material, layup, prop_angle)?;
    Ok(sweep_laminate(&lam, f, cfg))
}

pub fn sweep_laminate(lam: &Laminate, f: f64, cfg: &SweepConfig) -> ModalSweep {
    let mut points = Vec::new();
    let mut rejected_poles = 0;
    let mut coarse_max = 0.0f64;
    let n = ((cfg.cp_max - cfg.cp_min) / cfg.coarse_step).floor() as usize;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let cp = cfg.cp_min + i as f64 * cfg.coarse_step;
        let v = lam.characteristic(f, cp);
        if !v.is_finite() {
            prev = None;
            continue;
        }
        coarse_max = coarse_max.max(v.abs());
        if let Some((pc, pv)) = prev {
            if (pv > 0.0) != (v > 0.0) || v == 0.0 {
                let r = bisect(lam, f, pc, pv, cp, cfg);
                if r.is_root {
                    let shape = lam.mode_shape(f, r.cp);
                    points.push(ModePoint {
                        f,
                        prop_angle: lam.prop_angle,
                        cp: r.cp,
                        cg: None,
                        label: None,
                        shape,
                        ambiguous: false,
                    });
                    if points.len() == 3 {
                        break;
                    }
                } else {
                    rejected_poles += 1;
                }
            }
        }
        prev = Some((cp, v));
    }
    ModalSweep { points, rejected_poles, coarse_max }
}

/// Labels the fundamental roots of one (f, angle) by their mode shapes.
///
/// The slowest antisymmetric root is A0. A lone symmetric root is S0 when
/// its in-plane motion is mostly longitudinal and SH0 otherwise; of two
/// symmetric roots the faster is S0.
/// When parity cannot be resolved, or no component carries more than half of
/// the energy, labels fall back to cp order (A0 < SH0 < S0) and are flagged.
pub fn classify_modes(points: &[ModePoint]) -> Vec<ModePoint> {
    let mut out: Vec<ModePoint> = points.to_vec();
    out.sort_by(|a, b| a.cp.total_cmp(&b.cp));
    for p in out.iter_mut() {
        p.label = None;
        p.ambiguous = false;
    }
    let resolved = out.iter().all(|p| p.shape.parity != Parity::Mixed && p.shape.dominant_fraction() > 0.5);
    if !resolved {
        let n = out.len();
        for (i, p) in out.iter_mut().enumerate() {
            p.ambiguous = true;
            p.label = Some(match (i, n) {
                (0, _) => ModeLabel::A0,
                (i, n) if i == n - 1 => ModeLabel::S0,
                _ => ModeLabel::SH0,
            });
        }
        return out;
    }
    if let Some(a) = out.iter_mut().find(|p| p.shape.parity == Parity::Antisymmetric) {
        a.label = Some(ModeLabel::A0);
    }
    let sym: Vec<usize> = (0..out.len()).filter(|&i| out[i].shape.parity == Parity::Symmetric).collect();
    match sym.as_slice() {
        [] => {}
        [i] => {
            let p = &mut out[*i];
            p.label = Some(if p.shape.longitudinal_fraction() >= 0.5 { ModeLabel::S0 } else { ModeLabel::SH0 });
        }
        // Both in-plane roots: polarization rotates continuously with angle
        // and can cross the 50 % line, so cp order decides.
        [lo, hi, ..] => {
            let (lo, hi) = (*lo, *hi);
            out[lo].label = Some(ModeLabel::SH0);
            out[hi].label = Some(ModeLabel::S0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupVelocity {
    /// m/s
    pub cg: f64,
    /// Only one perturbed frequency was tracked.
    pub one_sided: bool,
    /// `cg` exceeds the largest ply bulk velocity by more than 1 %.
    pub exceeds_bulk_bound: bool,
}

/// Whether a root found at a perturbed frequency is the same mode.
fn same_mode(label: ModeLabel, reference: &ModeShape, candidate: &ModeShape) -> bool {
    match label {
        ModeLabel::A0 => candidate.parity != Parity::Symmetric,
        ModeLabel::S0 | ModeLabel::SH0 => {
            if candidate.parity == Parity::Antisymmetric {
                return false;
            }
            let a = reference.longitudinal_fraction() - 0.5;
            let b = candidate.longitudinal_fraction() - 0.5;
            // Allow drift near the crossover; reject a clear swap.
            a * b >= 0.0 || a.abs() < 0.1 || b.abs() < 0.1
        }
    }
}

/// Nearest root to `cp0` at frequency `f`, scanning outward.
fn track_root(lam: &Laminate, f: f64, cp0: f64, label: ModeLabel, shape: &ModeShape, cfg: &SweepConfig) -> Option<f64> {
    let step = (cp0 * 2e-4).max(1e-3);
    let window = cp0 * 0.05;
    let v0 = lam.characteristic(f, cp0);
    if !v0.is_finite() {
        return None;
    }
    let mut up = (cp0, v0);
    let mut down = (cp0, v0);
    let mut up_open = true;
    let mut down_open = true;
    let mut k = 1;
    while (up_open || down_open) && (k as f64) * step <= window {
        for dir in [1.0, -1.0] {
            let open = if dir > 0.0 { &mut up_open } else { &mut down_open };
            if !*open {
                continue;
            }
            let cp = cp0 + dir * k as f64 * step;
            if cp <= cfg.cp_min || cp >= cfg.cp_max {
                *open = false;
                continue;
            }
            let v = lam.characteristic(f, cp);
            let last = if dir > 0.0 { &mut up } else { &mut down };
            if !v.is_finite() {
                *open = false;
                continue;
            }
            if (v > 0.0) != (last.1 > 0.0) || v == 0.0 {
                let (lo, flo, hi) = if dir > 0.0 { (last.0, last.1, cp) } else { (cp, v, last.0) };
                let r = bisect(lam, f, lo, flo, hi, cfg);
                if r.is_root {
                    let cand = lam.mode_shape(f, r.cp);
                    return same_mode(label, shape, &cand).then_some(r.cp);
                }
            }
            *last = (cp, v);
        }
        k += 1;
    }
    None
}

fn omega_k(f: f64, cp: f64) -> (f64, f64) {
    let w = 2.0 * std::f64::consts::PI * f;
    (w, w / cp)
}

/// `dω/dk` at the point's wave-vector angle by central differences over
/// `f(1 ± group_velocity_df)`.
pub fn group_velocity(
    material: &Material,
    layup: &Layup,
    point: &ModePoint,
    cfg: &SweepConfig,
) -> Result<GroupVelocity, DispersionError> {
    validate_inputs(point.f, cfg)?;
    let lam = Laminate::new(material, layup, point.prop_angle)?;
    group_velocity_on(&lam, point, cfg)
}

pub fn group_velocity_on(lam: &Laminate, point: &ModePoint, cfg: &SweepConfig) -> Result<GroupVelocity, DispersionError> {
    let label = point.label.ok_or(DispersionError::Unlabeled)?;
    let f0 = point.f;
    let f_lo = f0 * (1.0 - cfg.group_velocity_df);
    let f_hi = f0 * (1.0 + cfg.group_velocity_df);
    let lo = track_root(lam, f_lo, point.cp, label, &point.shape, cfg);
    let hi = track_root(lam, f_hi, point.cp, label, &point.shape, cfg);
    let ((w1, k1), (w2, k2), one_sided) = match (lo, hi) {
        (Some(a), Some(b)) => (omega_k(f_lo, a), omega_k(f_hi, b), false),
        (None, Some(b)) => (omega_k(f0, point.cp), omega_k(f_hi, b), true),
        (Some(a), None) => (omega_k(f_lo, a), omega_k(f0, point.cp), true),
        (None, None) => return Err(DispersionError::ModeLost { mode: label, f: f0, cp: point.cp }),
    };
    let cg = (w2 - w1) / (k2 - k1);
    let exceeds_bulk_bound = cg > 1.01 * lam.max_bulk_velocity();
    Ok(GroupVelocity { cg, one_sided, exceeds_bulk_bound })
}

/// Full solve at one (f, angle): sweep, label, and group velocities of the
/// requested modes.
pub fn solve_modes(
    lam: &Laminate,
    f: f64,
    cfg: &SweepConfig,
    wanted: &[ModeLabel],
) -> Result<Vec<ModePoint>, DispersionError> {
    validate_inputs(f, cfg)?;
    let sweep = sweep_laminate(lam, f, cfg);
    let mut points = classify_modes(&sweep.points);
    for p in points.iter_mut() {
        if p.label.is_some_and(|l| wanted.contains(&l)) {
            if let Ok(g) = group_velocity_on(lam, p, cfg) {
                p.cg = Some(g.cg);
            }
        }
    }
    Ok(points)
}
