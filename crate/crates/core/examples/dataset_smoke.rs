//! Plans the bundled dataset configurations and generates the smoke set into
//! a temporary directory, then validates its manifest.
//!
//! `cargo run --release --example dataset_smoke`

use std::path::Path;

use polarwave::dataset::{generate_dataset, plan, validate_manifest, DatasetConfig, GenerateOptions, MANIFEST_FILE};

fn main() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["dataset1.json", "dataset2.json", "smoke.json"] {
        let cfg = DatasetConfig::from_json_file(configs.join(name)).unwrap();
        let p = plan(&cfg).unwrap();
        println!("{name}: {} tasks, {} records", p.tasks.len(), p.record_count());
    }
    let cfg = DatasetConfig::from_json_file(configs.join("smoke.json")).unwrap();
    let out = std::env::temp_dir().join(format!("polarwave-smoke-{}", std::process::id()));
    let summary = generate_dataset(&cfg, &out, &GenerateOptions::default(), |done, total| {
        eprint!("\r{done}/{total}");
    })
    .unwrap();
    eprintln!();
    println!("{summary:?} in {}", out.display());
    let report = validate_manifest(out.join(MANIFEST_FILE), Some(summary.total)).unwrap();
    println!("validation ok: {}", report.is_ok());
}
