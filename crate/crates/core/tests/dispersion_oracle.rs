mod common;

use common::rayleigh_lamb::Plate;
use polarwave::dispersion::*;
use polarwave::material::*;
use polarwave::polar::{polar_profile, polar_profiles, AngleCoverage, PolarError, PolarOptions};

const E: f64 = 70e9;
const NU: f64 = 0.33;
const RHO: f64 = 2700.0;

fn aluminium() -> Material {
    Material::isotropic(RHO, E, NU)
}

fn plate() -> Plate {
    Plate::new(E, NU, RHO, 2e-3)
}

fn labelled(mat: &Material, layup: &Layup, f: f64, deg: f64) -> Vec<ModePoint> {
    let lam = Laminate::new(mat, layup, deg.to_radians()).unwrap();
    solve_modes(&lam, f, &SweepConfig::default(), &[ModeLabel::A0, ModeLabel::S0, ModeLabel::SH0]).unwrap()
}

fn get(points: &[ModePoint], label: ModeLabel) -> &ModePoint {
    points.iter().find(|p| p.label == Some(label)).unwrap_or_else(|| panic!("{label} missing"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn isotropic_roots_match_rayleigh_lamb_at_100khz() {
    let pl = plate();
    let ud = standard_layup(LayupKind::Unidirectional);
    let sweep = find_modal_velocities(&aluminium(), &ud, 100e3, 0.0, &SweepConfig::default()).unwrap();
    let mut lamb: Vec<f64> = pl.symmetric_roots(100e3, 100.0, 12000.0);
    lamb.extend(pl.antisymmetric_roots(100e3, 100.0, 12000.0));
    lamb.sort_by(f64::total_cmp);
    // The full solve also sees the non-dispersive shear-horizontal root at cT.
    let smm: Vec<f64> = sweep.points.iter().map(|p| p.cp).filter(|&c| rel(c, pl.ct) > 1e-6).collect();
    assert_eq!(smm.len(), lamb.len(), "{smm:?} vs {lamb:?}");
    for (a, b) in smm.iter().zip(&lamb) {
        assert!(rel(*a, *b) < 1e-3, "{a} vs {b}");
    }
    assert!(sweep.points.iter().any(|p| rel(p.cp, pl.ct) < 1e-6));
}

#[test]
fn characteristic_vanishes_at_the_oracle_root() {
    let lam = Laminate::new(&aluminium(), &standard_layup(LayupKind::Unidirectional), 0.0).unwrap();
    let s0 = plate().s0(100e3);
    let sweep = sweep_laminate(&lam, 100e3, &SweepConfig::default());
    assert!(lam.characteristic(100e3, s0).abs() < 1e-6 * sweep.coarse_max);
}

#[test]
fn group_velocities_match_rayleigh_lamb() {
    let pl = plate();
    let ud = standard_layup(LayupKind::Unidirectional);
    for f in [40e3, 120e3, 200e3] {
        let pts = labelled(&aluminium(), &ud, f, 0.0);
        let a0 = pl.group_velocity(f, Plate::a0);
        let s0 = pl.group_velocity(f, Plate::s0);
        assert!(rel(get(&pts, ModeLabel::A0).cg.unwrap(), a0) < 2e-3, "A0 at {f}");
        assert!(rel(get(&pts, ModeLabel::S0).cg.unwrap(), s0) < 2e-3, "S0 at {f}");
    }
}

#[test]
fn isotropic_roots_do_not_depend_on_angle() {
    let ud = standard_layup(LayupKind::Unidirectional);
    let cfg = SweepConfig::default();
    let base = find_modal_velocities(&aluminium(), &ud, 60e3, 0.0, &cfg).unwrap();
    for deg in [37.0f64, 90.0] {
        let other = find_modal_velocities(&aluminium(), &ud, 60e3, deg.to_radians(), &cfg).unwrap();
        assert_eq!(other.points.len(), base.points.len());
        for (a, b) in base.points.iter().zip(&other.points) {
            assert!((a.cp - b.cp).abs() <= cfg.bisection_tol, "{deg}°: {} vs {}", a.cp, b.cp);
        }
    }
}

#[test]
fn frequency_thickness_scaling() {
    let cfg = SweepConfig::default();
    let mat = Material::from_catalog("AS4M3502").unwrap();
    for kind in [LayupKind::Unidirectional, LayupKind::CrossPly] {
        let thin = build_layup(kind, 16, 2e-3).unwrap();
        let thick = build_layup(kind, 16, 4e-3).unwrap();
        let a = find_modal_velocities(&mat, &thin, 80e3, 0.3, &cfg).unwrap();
        let b = find_modal_velocities(&mat, &thick, 40e3, 0.3, &cfg).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.cp - q.cp).abs() <= cfg.bisection_tol, "{kind}: {} vs {}", p.cp, q.cp);
        }
    }
}

#[test]
fn low_frequency_limits() {
    let pl = plate();
    let ud = standard_layup(LayupKind::Unidirectional);
    let pts = labelled(&aluminium(), &ud, 2e3, 0.0);
    let a0 = get(&pts, ModeLabel::A0);
    let s0 = get(&pts, ModeLabel::S0);
    // Bending waves: ω ∝ k² so cg → 2 cp.
    assert!(rel(a0.cg.unwrap(), 2.0 * a0.cp) < 0.02, "A0 cg/cp = {}", a0.cg.unwrap() / a0.cp);
    assert!(rel(s0.cg.unwrap(), s0.cp) < 0.005);
    let plate_velocity = (E / (RHO * (1.0 - NU * NU))).sqrt();
    assert!(rel(s0.cp, plate_velocity) < 0.005);
    assert!(rel(a0.cp, pl.a0(2e3)) < 1e-3);
    let labels: Vec<_> = pts.iter().map(|p| p.label.unwrap()).collect();
    assert_eq!(labels, [ModeLabel::A0, ModeLabel::SH0, ModeLabel::S0]);
}

#[test]
fn as4_roots_agree_with_a_fine_scan() {
    let mat = Material::from_catalog("AS4M3502").unwrap();
    let lam = Laminate::new(&mat, &standard_layup(LayupKind::Unidirectional), 0.0).unwrap();
    let f = 100e3;
    let mut fine = Vec::new();
    let mut prev = lam.characteristic(f, 50.0);
    let mut cp = 51.0;
    while cp <= 12000.0 && fine.len() < 3 {
        let v = lam.characteristic(f, cp);
        if v.is_finite() && prev.is_finite() && (v > 0.0) != (prev > 0.0) {
            fine.push(cp - 0.5);
        }
        prev = v;
        cp += 1.0;
    }
    let pts = classify_modes(&sweep_laminate(&lam, f, &SweepConfig::default()).points);
    assert_eq!(pts.len(), 3);
    for (p, c) in pts.iter().zip(&fine) {
        assert!((p.cp - c).abs() <= 0.5, "{} vs {c}", p.cp);
    }
    let (a0, sh0, s0) = (get(&pts, ModeLabel::A0), get(&pts, ModeLabel::SH0), get(&pts, ModeLabel::S0));
    assert!(a0.cp < sh0.cp && sh0.cp < s0.cp);
    // At 0° the SH root decouples and is pure u2.
    assert!(sh0.shape.energy[1] > 0.999);
    assert!((sh0.cp - (mat.g12 / mat.rho).sqrt()).abs() < 0.05);
}

#[test]
fn refined_roots_are_small() {
    let mat = Material::from_catalog("T700M21").unwrap();
    let lam = Laminate::new(&mat, &standard_layup(LayupKind::QuasiIsotropic), 0.7).unwrap();
    let sweep = sweep_laminate(&lam, 140e3, &SweepConfig::default());
    for p in &sweep.points {
        assert!(lam.magnitude(140e3, p.cp) < 1e-4 * sweep.coarse_max);
    }
}

#[test]
fn mode_order_and_bulk_bound_across_the_grid() {
    let mat = Material::from_catalog("T700M21").unwrap();
    for kind in LayupKind::ALL {
        let layup = standard_layup(kind);
        for f in [20e3, 100e3, 200e3] {
            let lam = Laminate::new(&mat, &layup, 0.4).unwrap();
            let pts = solve_modes(&lam, f, &SweepConfig::default(), &[ModeLabel::A0, ModeLabel::S0]).unwrap();
            let (a0, s0) = (get(&pts, ModeLabel::A0), get(&pts, ModeLabel::S0));
            assert!(a0.cp < s0.cp, "{kind} {f}");
            for p in [a0, s0] {
                assert!(p.cg.unwrap() <= 1.01 * lam.max_bulk_velocity(), "{kind} {f}");
            }
        }
    }
}

#[test]
fn labels_are_continuous_around_45_degrees() {
    let mat = Material::from_catalog("AS4M3502").unwrap();
    let ud = standard_layup(LayupKind::Unidirectional);
    let mut prev: Option<Vec<ModePoint>> = None;
    for deg in 40..=50 {
        let pts = labelled(&mat, &ud, 100e3, deg as f64);
        assert!(pts.iter().all(|p| !p.ambiguous));
        if let Some(prev) = &prev {
            for label in [ModeLabel::A0, ModeLabel::SH0, ModeLabel::S0] {
                let (a, b) = (get(prev, label).cp, get(&pts, label).cp);
                assert!(rel(b, a) < 0.05, "{label} jumps {a} -> {b} at {deg}°");
            }
        }
        prev = Some(pts);
    }
}

#[test]
fn unidirectional_profiles_are_smooth_and_fiber_aligned() {
    let mat = Material::from_catalog("AS4M3502").unwrap();
    let ud = standard_layup(LayupKind::Unidirectional);
    let ps = polar_profiles(&mat, &ud, 60e3, &[ModeLabel::A0, ModeLabel::S0], &PolarOptions::default()).unwrap();
    for p in &ps {
        for w in p.cg.windows(2) {
            assert!(rel(w[1], w[0]) < 0.10, "{} jump {} -> {}", p.mode, w[0], w[1]);
        }
        assert_eq!(p.cg[0], p.cg[360]);
    }
    let a0 = &ps[0];
    let imax = (0..=360).max_by(|&i, &j| a0.cg[i].total_cmp(&a0.cg[j])).unwrap();
    let imin = (0..=180).min_by(|&i, &j| a0.cg[i].total_cmp(&a0.cg[j])).unwrap();
    assert!(imax % 180 == 0, "A0 max at {imax}°");
    assert!((imin as i32 - 90).abs() <= 10, "A0 min at {imin}°");
}

#[test]
fn symmetric_completion_matches_brute_force() {
    let mat = Material::from_catalog("T300M914").unwrap();
    let cp = standard_layup(LayupKind::CrossPly);
    let opts = PolarOptions { sweep: SweepConfig { coarse_step: 20.0, ..Default::default() }, ..Default::default() };
    let fast = polar_profile(&mat, &cp, 160e3, ModeLabel::S0, &opts).unwrap();
    let lam = |deg: f64| Laminate::new(&mat, &cp, deg.to_radians()).unwrap();
    for deg in [17.0, 133.0, 250.0, 301.0] {
        let pts = solve_modes(&lam(deg), 160e3, &opts.sweep, &[ModeLabel::S0]).unwrap();
        let direct = get(&pts, ModeLabel::S0).cg.unwrap();
        assert!(rel(fast.cg[deg as usize], direct) < 1e-6, "{deg}°");
    }
    assert!(fast.interpolated.is_empty());
}

#[test]
fn mirrored_stack_mirrors_the_profile() {
    // Reflecting every ply angle reflects the wave field about x1.
    let mat = Material::from_catalog("T800M913").unwrap();
    let qi = standard_layup(LayupKind::QuasiIsotropic);
    let mirrored = Layup { ply_angles: qi.ply_angles.iter().map(|a| -a).collect(), ..qi.clone() };
    let cfg = SweepConfig::default();
    for deg in [20.0f64, 65.0] {
        let a = Laminate::new(&mat, &qi, (-deg).to_radians()).unwrap();
        let b = Laminate::new(&mat, &mirrored, deg.to_radians()).unwrap();
        let pa = solve_modes(&a, 40e3, &cfg, &[ModeLabel::A0]).unwrap();
        let pb = solve_modes(&b, 40e3, &cfg, &[ModeLabel::A0]).unwrap();
        let (ca, cb) = (get(&pa, ModeLabel::A0).cg.unwrap(), get(&pb, ModeLabel::A0).cg.unwrap());
        assert!(rel(ca, cb) < 1e-6, "{deg}°: {ca} vs {cb}");
    }
}

#[test]
fn shear_horizontal_mode_has_no_polar_profile() {
    let mat = Material::from_catalog("AS4M3502").unwrap();
    let ud = standard_layup(LayupKind::Unidirectional);
    let err = polar_profile(&mat, &ud, 100e3, ModeLabel::SH0, &PolarOptions::default()).unwrap_err();
    assert!(matches!(err, PolarError::UnsupportedMode(ModeLabel::SH0)));
}

#[test]
fn isotropic_profile_is_a_circle() {
    let opts = PolarOptions { coverage: AngleCoverage::Full, ..Default::default() };
    let ud = standard_layup(LayupKind::Unidirectional);
    let p = polar_profile(&aluminium(), &ud, 100e3, ModeLabel::A0, &opts).unwrap();
    assert!((p.max_cg() - p.min_cg()) / p.min_cg() < 0.005);
}
