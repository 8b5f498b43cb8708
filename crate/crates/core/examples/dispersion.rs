//! Modal phase and group velocities of a laminate at a few frequencies.
//!
//! `cargo run --release --example dispersion -- AS4M3502 quasi-isotropic 30`

use polarwave::dispersion::{solve_modes, Laminate, ModeLabel, SweepConfig};
use polarwave::material::{standard_layup, LayupKind, Material};

fn main() {
    let mut args = std::env::args().skip(1);
    let mat = Material::from_catalog(&args.next().unwrap_or_else(|| "AS4M3502".into())).expect("known material");
    let kind = match args.next().as_deref() {
        Some("cross-ply") => LayupKind::CrossPly,
        Some("quasi-isotropic") => LayupKind::QuasiIsotropic,
        _ => LayupKind::Unidirectional,
    };
    let deg: f64 = args.next().map_or(0.0, |a| a.parse().expect("angle in degrees"));
    let lam = Laminate::new(&mat, &standard_layup(kind), deg.to_radians()).expect("valid laminate");
    println!("{} {kind} at {deg}°, bulk bound {:.0} m/s", mat.label(), lam.max_bulk_velocity());
    println!("{:>8} {:>5} {:>9} {:>9}", "f [kHz]", "mode", "cp [m/s]", "cg [m/s]");
    for f in [20e3, 50e3, 100e3, 150e3, 200e3] {
        for p in solve_modes(&lam, f, &SweepConfig::default(), &[ModeLabel::A0, ModeLabel::SH0, ModeLabel::S0]).expect("valid frequency") {
            let label = p.label.map_or("?".to_string(), |l| l.to_string());
            let cg = p.cg.map_or("-".to_string(), |v| format!("{v:.1}"));
            println!("{:>8} {label:>5} {:>9.1} {cg:>9}", f / 1e3, p.cp);
        }
    }
}
