//! Writes a WGT1 weight file, reads it back and prints the layer table.
//!
//! `cargo run --example weights_io -- model.wgt`

use polarwave::vae_infer::{default_architecture, load_weights, NetworkWeights};

fn main() {
    let path = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("polarwave-example.wgt"), Into::into);
    let (enc, dec) = default_architecture(5, 64, &[16, 32, 64, 128, 256]);
    let w = NetworkWeights::seeded(5, 2, 64, enc, dec, 1, 0.1).unwrap();
    w.write(&path).unwrap();
    let back = load_weights(&path).unwrap();
    println!("{}: {} bytes, latent dim {}, image {:?}", path.display(), back.to_bytes().len(), back.latent_dim, back.image_shape());
    for (part, layers) in [("encoder", &back.encoder), ("decoder", &back.decoder)] {
        for l in layers {
            let (nw, nb) = l.spec.param_counts();
            println!("  {part} {:<16} {nw:>8} weights {nb:>5} biases", l.spec.name());
        }
    }
    println!("round trip exact: {}", back.to_bytes() == w.to_bytes());
}
