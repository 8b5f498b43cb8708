//! Command-line front end. Machine-readable output goes to files or stdout,
//! a human summary to stderr.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{self, DatasetConfig, MANIFEST_FILE};
use crate::dispersion::{solve_modes, Laminate, ModeLabel, SweepConfig};
use crate::material::{build_layup, LayupKind, Material};
use crate::polar::{default_scale, polar_profiles, rasterize, symmetry_score, AngleCoverage, PolarOptions};
use crate::vae_infer::{self, LatentPoint, DEFAULT_BOUNDS};

pub const OUT_ENV: &str = "POLARWAVE_OUT";

#[derive(Debug, Parser)]
#[command(name = "polarwave", version, about = "Guided-wave polar representations for laminated composites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase and group velocities of the fundamental modes as CSV.
    Dispersion(DispersionArgs),
    /// Polar group-velocity profiles and rasters for one plate and frequency.
    Polar(PolarArgs),
    /// Synthesize a dataset from a JSON config.
    Dataset(DatasetArgs),
    /// Draw latent points and print them as a z1..zL CSV.
    Sample(SampleArgs),
    /// Decode latent points into raster pairs.
    Generate(GenerateArgs),
    /// Re-check a dataset manifest.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct PlateArgs {
    /// Material JSON file, or a name from the bundled table.
    #[arg(long)]
    pub material: String,
    #[arg(long, default_value = "unidirectional")]
    pub layup: LayupKind,
    #[arg(long, default_value_t = 16)]
    pub plies: usize,
    /// Total thickness, m.
    #[arg(long, default_value_t = 2e-3)]
    pub thickness: f64,
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[command(flatten)]
    pub plate: PlateArgs,
    /// Frequency in Hz; repeat for several.
    #[arg(long = "freq", required = true, num_args = 1.., allow_negative_numbers = true)]
    pub freqs: Vec<f64>,
    /// Propagation angle, degrees.
    #[arg(long, default_value_t = 0.0)]
    pub angle: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    A0,
    S0,
    Both,
}

#[derive(Debug, Args)]
pub struct PolarArgs {
    #[command(flatten)]
    pub plate: PlateArgs,
    /// Hz
    #[arg(long, allow_negative_numbers = true)]
    pub freq: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    /// Solve every angle instead of completing the profile by symmetry.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Image half-width for A0, m/s.
    #[arg(long, default_value_t = default_scale(ModeLabel::A0))]
    pub scale_a0: f64,
    /// Image half-width for S0, m/s.
    #[arg(long, default_value_t = default_scale(ModeLabel::S0))]
    pub scale_s0: f64,
    #[arg(long, env = OUT_ENV, default_value = "polarwave-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output_dir.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Start from an empty manifest instead of resuming.
    #[arg(long)]
    pub overwrite: bool,
    /// Print the record count without solving anything.
    #[arg(long)]
    pub plan: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(subcommand)]
    pub sampler: SamplerCmd,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LatentArgs {
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = DEFAULT_BOUNDS[0], allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = DEFAULT_BOUNDS[1], allow_hyphen_values = true)]
    pub hi: f64,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SamplerCmd {
    /// Uniform random points in the latent box.
    Mc {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        latent: LatentArgs,
    },
    /// Evenly spaced points along one axis.
    Dir {
        /// 1-based latent axis.
        #[arg(long)]
        axis: usize,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[command(flatten)]
        latent: LatentArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerKind {
    Mc,
    Dir,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Sample internally instead of reading latent points.
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerKind>,
    /// Latent CSV to decode; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub latents: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub axis: usize,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BOUNDS[0], allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = DEFAULT_BOUNDS[1], allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = vae_infer::THRESHOLD)]
    pub threshold: f64,
    #[arg(long, env = OUT_ENV, default_value = "polarwave-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Manifest file, or a directory containing manifest.jsonl.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Expected record count.
    #[arg(long, conflicts_with = "config")]
    pub expected: Option<usize>,
    /// Derive the expected count from a dataset config.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

type Failure = Box<dyn std::error::Error>;

fn load_material(spec: &str) -> Result<Material, Failure> {
    if Path::new(spec).is_file() {
        return Ok(Material::from_json_file(spec)?);
    }
    Material::from_catalog(spec).ok_or_else(|| format!("`{spec}` is neither a material file nor a bundled material").into())
}

/// Opens an output file, refusing to replace an existing one unless asked.
fn create_output(path: &Path, overwrite: bool) -> Result<fs::File, Failure> {
    if path.exists() && !overwrite {
        return Err(format!("{} exists; pass --overwrite to replace it", path.display()).into());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::File::create(path)?)
}

fn emit(out: &Option<PathBuf>, overwrite: bool, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => create_output(p, overwrite)?.write_all(text.as_bytes())?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_dispersion(a: &DispersionArgs) -> Result<(), Failure> {
    let mat = load_material(&a.plate.material)?;
    let layup = build_layup(a.plate.layup, a.plate.plies, a.plate.thickness)?;
    let cfg = SweepConfig::default();
    let lam = Laminate::new(&mat, &layup, a.angle.to_radians())?;
    let mut csv = String::from("f_hz,angle_deg,mode,cp_mps,cg_mps,ambiguous\n");
    for &f in &a.freqs {
        let pts = solve_modes(&lam, f, &cfg, &[ModeLabel::A0, ModeLabel::S0, ModeLabel::SH0])?;
        for p in &pts {
            let label = p.label.map_or("?".to_string(), |l| l.to_string());
            let cg = p.cg.map_or(String::new(), |v| v.to_string());
            csv.push_str(&format!("{f},{},{label},{},{cg},{}\n", a.angle, p.cp, p.ambiguous));
            eprintln!("{f:>9} Hz  {label:>3}  cp = {:8.1} m/s  cg = {}", p.cp, p.cg.map_or("-".into(), |v| format!("{v:.1} m/s")));
        }
    }
    emit(&a.out, a.overwrite, &csv)
}

fn run_polar(a: &PolarArgs) -> Result<(), Failure> {
    let mat = load_material(&a.plate.material)?;
    let layup = build_layup(a.plate.layup, a.plate.plies, a.plate.thickness)?;
    let modes = match a.mode {
        ModeArg::A0 => vec![ModeLabel::A0],
        ModeArg::S0 => vec![ModeLabel::S0],
        ModeArg::Both => vec![ModeLabel::A0, ModeLabel::S0],
    };
    let opts = PolarOptions {
        coverage: if a.full { AngleCoverage::Full } else { AngleCoverage::Symmetric },
        ..Default::default()
    };
    let profiles = polar_profiles(&mat, &layup, a.freq, &modes, &opts)?;
    fs::create_dir_all(&a.out)?;
    for p in &profiles {
        let scale = if p.mode == ModeLabel::A0 { a.scale_a0 } else { a.scale_s0 };
        let img = rasterize(p, scale, a.size)?;
        let stem = format!("{}_{}_{}k_{}", mat.label(), a.plate.layup.tag(), a.freq / 1e3, p.mode);
        create_output(&a.out.join(format!("{stem}.csv")), a.overwrite)?.write_all(p.to_csv().as_bytes())?;
        create_output(&a.out.join(format!("{stem}.pgm")), a.overwrite)?.write_all(&img.to_pgm())?;
        eprintln!(
            "{stem}: cg {:.1}..{:.1} m/s, symmetry {:.4}, {} interpolated angles",
            p.min_cg(),
            p.max_cg(),
            symmetry_score(&img).score,
            p.interpolated.len()
        );
    }
    Ok(())
}

fn run_dataset(a: &DatasetArgs) -> Result<(), Failure> {
    let cfg = DatasetConfig::from_json_file(&a.config)?;
    let plan = dataset::plan(&cfg)?;
    if a.plan {
        println!("{}", plan.record_count());
        eprintln!(
            "{} tasks x {} modes = {} records ({} rejected material draws)",
            plan.tasks.len(),
            plan.modes.len(),
            plan.record_count(),
            plan.rejected_draws
        );
        return Ok(());
    }
    let out = a.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("polarwave-out"));
    let opts = dataset::GenerateOptions { jobs: a.jobs, overwrite: a.overwrite };
    let summary = dataset::generate_dataset(&cfg, &out, &opts, |done, total| eprintln!("{done}/{total} records"))?;
    eprintln!(
        "{}: {} records ({} written, {} already present, {} failed)",
        out.join(MANIFEST_FILE).display(),
        summary.total,
        summary.written,
        summary.skipped,
        summary.failed
    );
    Ok(())
}

fn bounds(lo: f64, hi: f64) -> [f64; 2] {
    [lo, hi]
}

fn run_sample(a: &SampleArgs) -> Result<(), Failure> {
    let (points, dim) = match &a.sampler {
        SamplerCmd::Mc { n, seed, latent } => {
            (vae_infer::sample_monte_carlo(*n, latent.dim, bounds(latent.lo, latent.hi), *seed)?, latent.dim)
        }
        SamplerCmd::Dir { axis, steps, latent } => {
            (vae_infer::sample_directional(*axis, *steps, latent.dim, bounds(latent.lo, latent.hi))?, latent.dim)
        }
    };
    emit(&a.out, a.overwrite, &vae_infer::latent_csv(&points, dim))?;
    eprintln!("{} latent points of dimension {dim}", points.len());
    Ok(())
}

fn run_generate(a: &GenerateArgs) -> Result<(), Failure> {
    let w = vae_infer::load_weights(&a.weights)?;
    let b = bounds(a.lo, a.hi);
    let points: Vec<LatentPoint> = match a.sampler {
        Some(SamplerKind::Mc) => vae_infer::sample_monte_carlo(a.n, w.latent_dim, b, a.seed)?,
        Some(SamplerKind::Dir) => vae_infer::sample_directional(a.axis, a.steps, w.latent_dim, b)?,
        None if a.latents == "-" => vae_infer::read_latent_csv(io::stdin().lock())?,
        None => vae_infer::read_latent_csv(BufReader::new(fs::File::open(&a.latents)?))?,
    };
    let opts = vae_infer::GenerateOptions { threshold: a.threshold, overwrite: a.overwrite, jobs: a.jobs };
    let records = vae_infer::generate(&points, &w, &a.out, &opts)?;
    let failed = records.iter().filter(|r| r.failed).count();
    eprintln!(
        "{}: {} samples, {} rasters, {failed} failed",
        a.out.join(vae_infer::GENERATION_MANIFEST).display(),
        records.len(),
        2 * (records.len() - failed)
    );
    Ok(())
}

/// Returns whether the manifest passed.
fn run_validate(a: &ValidateArgs) -> Result<bool, Failure> {
    let path = if a.manifest.is_dir() { a.manifest.join(MANIFEST_FILE) } else { a.manifest.clone() };
    let expected = match &a.config {
        Some(c) => Some(dataset::plan(&DatasetConfig::from_json_file(c)?)?.record_count()),
        None => a.expected,
    };
    let report = dataset::validate_manifest(&path, expected)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!(
        "{}: {} records{}, {} failed, {} dangling, {} below symmetry threshold: {}",
        path.display(),
        report.records,
        expected.map_or(String::new(), |e| format!(" (expected {e})")),
        report.failed,
        report.dangling.len(),
        report.asymmetric.len(),
        if report.is_ok() { "OK" } else { "FAILED" }
    );
    Ok(report.is_ok())
}

/// Runs one invocation and returns the process exit code: 0 on success,
/// 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Dispersion(a) => run_dispersion(a).map(|_| true),
        Command::Polar(a) => run_polar(a).map(|_| true),
        Command::Dataset(a) => run_dataset(a).map(|_| true),
        Command::Sample(a) => run_sample(a).map(|_| true),
        Command::Generate(a) => run_generate(a).map(|_| true),
        Command::Validate(a) => run_validate(a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
