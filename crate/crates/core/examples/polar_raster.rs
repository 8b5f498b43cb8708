//! Solves a group-velocity polar profile, rasterises it and scores its
//! mirror symmetry. Writes the PGM and CSV into the working directory.
//!
//! `cargo run --release --example polar_raster -- T800M913 100000`

use polarwave::dispersion::ModeLabel;
use polarwave::material::{standard_layup, LayupKind, Material};
use polarwave::polar::{default_scale, polar_profiles, rasterize, symmetry_score, PolarOptions, DEFAULT_SIZE};

fn main() {
    let mut args = std::env::args().skip(1);
    let mat = Material::from_catalog(&args.next().unwrap_or_else(|| "AS4M3502".into())).expect("known material");
    let f: f64 = args.next().map_or(100e3, |a| a.parse().expect("frequency in Hz"));
    let layup = standard_layup(LayupKind::CrossPly);
    let profiles = polar_profiles(&mat, &layup, f, &[ModeLabel::A0, ModeLabel::S0], &PolarOptions::default()).expect("solvable");
    for p in &profiles {
        let img = rasterize(p, default_scale(p.mode), DEFAULT_SIZE).expect("profile fits the scale");
        let stem = format!("{}_cp_{}k_{}", mat.label(), f / 1e3, p.mode);
        img.write_pgm(format!("{stem}.pgm")).unwrap();
        p.write_csv(format!("{stem}.csv")).unwrap();
        println!(
            "{}: cg {:.0}..{:.0} m/s, {} pixels set, symmetry {:.3} -> {stem}.pgm",
            p.mode,
            p.min_cg(),
            p.max_cg(),
            img.count(),
            symmetry_score(&img).score
        );
        for row in (0..DEFAULT_SIZE).step_by(4) {
            let line: String = (0..DEFAULT_SIZE).step_by(2).map(|c| if img.get(row, c) == 1 { '#' } else { '.' }).collect();
            println!("  {line}");
        }
    }
}
