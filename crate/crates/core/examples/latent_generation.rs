//! Samples latent points and decodes them into raster pairs with a seeded
//! (untrained) network. Real weights come from a WGT1 file instead.
//!
//! `cargo run --release --example latent_generation`

use polarwave::dispersion::ModeLabel;
use polarwave::vae_infer::{
    decode, default_architecture, generate, latent_csv, sample_directional, sample_monte_carlo, GenerateOptions,
    NetworkWeights, DEFAULT_BOUNDS, THRESHOLD,
};

fn main() {
    let (enc, dec) = default_architecture(5, 64, &[16, 32, 64, 128, 256]);
    let w = NetworkWeights::seeded(5, 2, 64, enc, dec, 42, 0.1).unwrap();

    let sweep = sample_directional(1, 5, 5, DEFAULT_BOUNDS).unwrap();
    print!("{}", latent_csv(&sweep, 5));
    for p in &sweep {
        let pair = decode(p, &w).unwrap();
        let a0 = pair.channel(ModeLabel::A0);
        let (lo, hi) = a0.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        println!("z1 = {:+.1}: A0 intensities {lo:.4}..{hi:.4}, threshold {THRESHOLD}", p.z[0]);
    }

    let points = sample_monte_carlo(8, 5, DEFAULT_BOUNDS, 7).unwrap();
    let out = std::env::temp_dir().join(format!("polarwave-gen-{}", std::process::id()));
    let records = generate(&points, &w, &out, &GenerateOptions::default()).unwrap();
    let failed = records.iter().filter(|r| r.failed).count();
    println!("{} pairs written to {} ({failed} failed)", records.len(), out.display());
}
