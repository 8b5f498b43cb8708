//! Builds a ply stiffness from engineering constants and rotates it in-plane.
//!
//! `cargo run --example stiffness_rotation -- T300M914 30`

use polarwave::material::{rotate_stiffness, stiffness_from_engineering, Material};

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "AS4M3502".into());
    let deg: f64 = args.next().map_or(45.0, |a| a.parse().expect("angle in degrees"));
    let Some(mat) = Material::from_catalog(&name) else {
        eprintln!("unknown material {name}; known: {:?}", Material::catalog().iter().map(|m| m.label().to_string()).collect::<Vec<_>>());
        std::process::exit(1);
    };
    let c = stiffness_from_engineering(&mat).expect("valid constants");
    println!("{} (rho {} kg/m³, derived G23 {:.2} GPa)", mat.label(), mat.rho, mat.g23() / 1e9);
    println!("C [GPa], ply axes:\n{:.3}", c.c / 1e9);
    let r = rotate_stiffness(&c, deg.to_radians()).expect("finite angle");
    println!("C [GPa] rotated by {deg}°:\n{:.3}", r.c / 1e9);
}
