//! Seeded material sampling and batch synthesis of polar-representation
//! datasets with a JSON Lines manifest.

use std::collections::{BTreeSet, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::ModeLabel;
use crate::material::{build_layup, stiffness_from_engineering, LayupKind, Material, MaterialError};
use crate::polar::{
    default_scale, polar_profiles, rasterize, symmetry_score, PolarError, PolarOptions, PolarProfile, DEFAULT_SIZE,
};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
/// Draw attempts per material before the bounds are declared inconsistent.
const MAX_DRAWS_PER_MATERIAL: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("bounds for `{0}` need finite lower < upper")]
    BadBounds(&'static str),
    #[error("rejection rate {rate:.2} exceeds 0.5 ({rejected} of {drawn} draws); bounds admit too few valid materials")]
    RejectionRate { rejected: usize, drawn: usize, rate: f64 },
    #[error("invalid dataset config: {0}")]
    BadConfig(String),
    #[error("unknown material `{0}` in the bundled table")]
    UnknownMaterial(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("{path}:{line}: {msg}")]
    Manifest { path: PathBuf, line: usize, msg: String },
    #[error("manifest references missing files for ids: {}", .0.join(", "))]
    Dangling(Vec<String>),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Polar(#[from] PolarError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Closed interval per property, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialBounds {
    pub rho: [f64; 2],
    pub e1: [f64; 2],
    pub e2: [f64; 2],
    pub g12: [f64; 2],
    pub nu12: [f64; 2],
    pub nu23: [f64; 2],
}

impl Default for MaterialBounds {
    fn default() -> Self {
        MaterialBounds {
            rho: [1304.0, 1760.0],
            e1: [115e9, 184e9],
            e2: [6e9, 14e9],
            g12: [3e9, 9e9],
            nu12: [0.2, 0.52],
            nu23: [0.23, 0.59],
        }
    }
}

impl MaterialBounds {
    fn fields(&self) -> [(&'static str, [f64; 2]); 6] {
        [
            ("rho", self.rho),
            ("e1", self.e1),
            ("e2", self.e2),
            ("g12", self.g12),
            ("nu12", self.nu12),
            ("nu23", self.nu23),
        ]
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (name, [lo, hi]) in self.fields() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(DatasetError::BadBounds(name));
            }
        }
        Ok(())
    }

    pub fn contains(&self, m: &Material) -> bool {
        let vals = [m.rho, m.e1, m.e2, m.g12, m.nu12, m.nu23];
        self.fields().iter().zip(vals).all(|((_, [lo, hi]), v)| *lo <= v && v <= *hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledMaterials {
    pub materials: Vec<Material>,
    /// Draws discarded for a non-positive-definite stiffness.
    pub rejected: usize,
}

/// `n` uniform draws inside `bounds`. Material `i` uses its own ChaCha
/// stream of `seed`, so any subset can be regenerated independently.
pub fn sample_materials(bounds: &MaterialBounds, n: usize, seed: u64) -> Result<SampledMaterials, DatasetError> {
    bounds.validate()?;
    let mut materials = Vec::with_capacity(n);
    let mut rejected = 0;
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut attempts = 0;
        let m = loop {
            let [rho, e1, e2, g12, nu12, nu23] = bounds.fields().map(|(_, [lo, hi])| rng.random_range(lo..=hi));
            let m = Material::new(rho, e1, e2, g12, nu12, nu23).named(format!("sample-{i:05}"));
            attempts += 1;
            if stiffness_from_engineering(&m).is_ok() {
                break m;
            }
            rejected += 1;
            if attempts >= MAX_DRAWS_PER_MATERIAL {
                let drawn = materials.len() + rejected;
                return Err(DatasetError::RejectionRate { rejected, drawn, rate: rejected as f64 / drawn as f64 });
            }
        };
        materials.push(m);
    }
    let drawn = n + rejected;
    if drawn > 0 && rejected * 2 > drawn {
        return Err(DatasetError::RejectionRate { rejected, drawn, rate: rejected as f64 / drawn as f64 });
    }
    Ok(SampledMaterials { materials, rejected })
}

/// Where the materials of a dataset come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialSource {
    /// Every row of the bundled commercial table.
    Catalog,
    /// Selected rows of the bundled table, by name.
    Named(Vec<String>),
    Explicit(Vec<Material>),
    Sampled { #[serde(default)] bounds: MaterialBounds, count: usize, seed: u64 },
}

impl MaterialSource {
    pub fn resolve(&self) -> Result<SampledMaterials, DatasetError> {
        let plain = |materials| Ok(SampledMaterials { materials, rejected: 0 });
        match self {
            MaterialSource::Catalog => plain(Material::catalog()),
            MaterialSource::Named(names) => plain(
                names
                    .iter()
                    .map(|n| Material::from_catalog(n).ok_or_else(|| DatasetError::UnknownMaterial(n.clone())))
                    .collect::<Result<_, _>>()?,
            ),
            MaterialSource::Explicit(list) => {
                for m in list {
                    stiffness_from_engineering(m)?;
                }
                plain(list.clone())
            }
            MaterialSource::Sampled { bounds, count, seed } => sample_materials(bounds, *count, *seed),
        }
    }
}

/// Image half-width per mode, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Scales { a0: default_scale(ModeLabel::A0), s0: default_scale(ModeLabel::S0) }
    }
}

impl Scales {
    pub fn get(&self, mode: ModeLabel) -> f64 {
        match mode {
            ModeLabel::A0 => self.a0,
            _ => self.s0,
        }
    }
}

pub fn default_frequencies() -> Vec<f64> {
    (1..=10).map(|k| k as f64 * 20e3).collect()
}

fn default_layups() -> Vec<LayupKind> {
    LayupKind::ALL.to_vec()
}

fn default_modes() -> Vec<ModeLabel> {
    vec![ModeLabel::A0, ModeLabel::S0]
}

fn default_plies() -> usize {
    16
}

fn default_thickness() -> f64 {
    2e-3
}

fn default_size() -> usize {
    DEFAULT_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub materials: MaterialSource,
    /// Hz
    #[serde(default = "default_frequencies")]
    pub frequencies: Vec<f64>,
    #[serde(default = "default_layups")]
    pub layups: Vec<LayupKind>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeLabel>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_plies")]
    pub n_plies: usize,
    /// m
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    #[serde(default = "default_size")]
    pub image_size: usize,
    #[serde(default)]
    pub scales: Scales,
    #[serde(default)]
    pub polar: PolarOptions,
}

impl DatasetConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<DatasetConfig, DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: DatasetConfig =
            serde_json::from_str(&text).map_err(|e| DatasetError::BadConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::BadConfig(m.into()));
        if self.frequencies.is_empty() || self.layups.is_empty() || self.modes.is_empty() {
            return bad("frequencies, layups and modes must be nonempty");
        }
        if self.frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return bad("frequencies must be positive");
        }
        if self.modes.iter().any(|m| *m == ModeLabel::SH0) {
            return bad("only A0 and S0 have polar representations");
        }
        if !(self.scales.a0 > 0.0 && self.scales.s0 > 0.0) {
            return bad("scales must be positive");
        }
        if self.image_size == 0 || self.image_size % 2 != 0 {
            return bad("image_size must be even and positive");
        }
        match &self.materials {
            MaterialSource::Named(v) if v.is_empty() => return bad("material list is empty"),
            MaterialSource::Explicit(v) if v.is_empty() => return bad("material list is empty"),
            MaterialSource::Sampled { bounds, .. } => bounds.validate()?,
            _ => {}
        }
        for &k in &self.layups {
            build_layup(k, self.n_plies, self.thickness)?;
        }
        self.polar.sweep.validate().map_err(|e| DatasetError::BadConfig(e.to_string()))?;
        Ok(())
    }
}

/// One (material, layup, frequency) combination; each yields a record per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub material_index: usize,
    pub material: Material,
    pub layup: LayupKind,
    /// Hz
    pub f: f64,
}

pub fn task_id(material_index: usize, layup: LayupKind, f: f64) -> String {
    format!("m{material_index:05}-{}-{}k", layup.tag(), f / 1e3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub tasks: Vec<Task>,
    pub modes: Vec<ModeLabel>,
    pub rejected_draws: usize,
}

impl Plan {
    pub fn record_count(&self) -> usize {
        self.tasks.len() * self.modes.len()
    }
}

/// Expands a config into its tasks without solving anything.
pub fn plan(cfg: &DatasetConfig) -> Result<Plan, DatasetError> {
    cfg.validate()?;
    let sampled = cfg.materials.resolve()?;
    let mut tasks = Vec::new();
    for (mi, m) in sampled.materials.iter().enumerate() {
        for &layup in &cfg.layups {
            for &f in &cfg.frequencies {
                tasks.push(Task { id: task_id(mi, layup, f), material_index: mi, material: m.clone(), layup, f });
            }
        }
    }
    Ok(Plan { tasks, modes: cfg.modes.clone(), rejected_draws: sampled.rejected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub material: String,
    pub rho: f64,
    pub e1: f64,
    pub e2: f64,
    pub g12: f64,
    pub nu12: f64,
    pub nu23: f64,
    pub layup: LayupKind,
    pub frequency_hz: f64,
    pub mode: ModeLabel,
    /// Relative to the manifest directory; absent for failed records.
    pub raster: Option<String>,
    pub profile: Option<String>,
    pub symmetry_score: Option<f64>,
    /// Profile angles filled by interpolation.
    #[serde(default)]
    pub interpolated: usize,
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestRecord {
    fn key(&self) -> (String, ModeLabel) {
        (self.id.clone(), self.mode)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GenerateOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Discard an existing manifest instead of resuming it.
    pub overwrite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSummary {
    pub total: usize,
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
    pub rejected_draws: usize,
}

fn record_base(task: &Task, mode: ModeLabel) -> ManifestRecord {
    let m = &task.material;
    ManifestRecord {
        id: task.id.clone(),
        material: m.label().to_string(),
        rho: m.rho,
        e1: m.e1,
        e2: m.e2,
        g12: m.g12,
        nu12: m.nu12,
        nu23: m.nu23,
        layup: task.layup,
        frequency_hz: task.f,
        mode,
        raster: None,
        profile: None,
        symmetry_score: None,
        interpolated: 0,
        failed: false,
        error: None,
    }
}

fn failed_record(task: &Task, mode: ModeLabel, err: &dyn std::fmt::Display) -> ManifestRecord {
    ManifestRecord { failed: true, error: Some(err.to_string()), ..record_base(task, mode) }
}

/// Solves, rasterizes and writes one task. Solver problems become flagged
/// records; only I/O errors propagate.
fn run_task(cfg: &DatasetConfig, task: &Task, modes: &[ModeLabel], root: &Path) -> Result<Vec<ManifestRecord>, DatasetError> {
    let layup = build_layup(task.layup, cfg.n_plies, cfg.thickness)?;
    let profiles: Vec<Result<PolarProfile, PolarError>> =
        match polar_profiles(&task.material, &layup, task.f, modes, &cfg.polar) {
            Ok(ps) => ps.into_iter().map(Ok).collect(),
            // Retry mode by mode so one unresolved mode does not take the other down.
            Err(_) if modes.len() > 1 => modes
                .iter()
                .map(|&m| polar_profiles(&task.material, &layup, task.f, &[m], &cfg.polar).map(|mut v| v.remove(0)))
                .collect(),
            Err(e) => vec![Err(e)],
        };
    let mut out = Vec::with_capacity(modes.len());
    for (&mode, prof) in modes.iter().zip(profiles) {
        let prof = match prof {
            Ok(p) => p,
            Err(e) => {
                out.push(failed_record(task, mode, &e));
                continue;
            }
        };
        let img = match rasterize(&prof, cfg.scales.get(mode), cfg.image_size) {
            Ok(img) => img,
            Err(e) => {
                out.push(failed_record(task, mode, &e));
                continue;
            }
        };
        let stem = format!("{}_{}", task.id, mode);
        let raster = format!("rasters/{stem}.pgm");
        let profile = format!("profiles/{stem}.csv");
        let rp = root.join(&raster);
        img.write_pgm(&rp).map_err(|e| match e {
            PolarError::Io(source) => DatasetError::Io { path: rp.clone(), source },
            other => other.into(),
        })?;
        let pp = root.join(&profile);
        fs::write(&pp, prof.to_csv()).map_err(io_err(&pp))?;
        out.push(ManifestRecord {
            raster: Some(raster),
            profile: Some(profile),
            symmetry_score: Some(symmetry_score(&img).score),
            interpolated: prof.interpolated.len(),
            ..record_base(task, mode)
        });
    }
    Ok(out)
}

/// Records that survive in an existing manifest. A torn final line from an
/// interrupted run is dropped and the file truncated to the last full record.
fn resume_manifest(path: &Path) -> Result<Vec<ManifestRecord>, DatasetError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut keep = 0;
    let mut records = Vec::new();
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if !line.ends_with('\n') {
            break;
        }
        let rec: ManifestRecord = serde_json::from_str(line.trim_end()).map_err(|e| DatasetError::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        records.push(rec);
        keep += line.len();
    }
    if keep < text.len() {
        let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        f.set_len(keep as u64).map_err(io_err(path))?;
    }
    Ok(records)
}

/// Generates every record of `cfg` under `out_dir`. Tasks already present in
/// the manifest are skipped; new records are appended in plan order, so the
/// result is byte-identical however the work is scheduled.
pub fn generate_dataset(
    cfg: &DatasetConfig,
    out_dir: &Path,
    opts: &GenerateOptions,
    mut progress: impl FnMut(usize, usize),
) -> Result<DatasetSummary, DatasetError> {
    let plan = plan(cfg)?;
    for sub in ["rasters", "profiles"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let manifest = out_dir.join(MANIFEST_FILE);
    if opts.overwrite && manifest.exists() {
        fs::remove_file(&manifest).map_err(io_err(&manifest))?;
    }
    let done: HashSet<(String, ModeLabel)> = resume_manifest(&manifest)?.iter().map(ManifestRecord::key).collect();

    let pending: Vec<(&Task, Vec<ModeLabel>)> = plan
        .tasks
        .iter()
        .filter_map(|t| {
            let modes: Vec<ModeLabel> =
                plan.modes.iter().copied().filter(|&m| !done.contains(&(t.id.clone(), m))).collect();
            (!modes.is_empty()).then_some((t, modes))
        })
        .collect();
    let total = plan.record_count();
    let mut summary = DatasetSummary {
        total,
        written: 0,
        skipped: total - pending.iter().map(|(_, m)| m.len()).sum::<usize>(),
        failed: 0,
        rejected_draws: plan.rejected_draws,
    };

    let pool = match opts.jobs {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| DatasetError::BadConfig(e.to_string()))?,
        ),
        None => None,
    };
    let threads = pool.as_ref().map_or_else(rayon::current_num_threads, |p| p.current_num_threads());
    let chunk = (2 * threads).max(1);

    let mut appender = OpenOptions::new().create(true).append(true).open(&manifest).map_err(io_err(&manifest))?;
    for batch in pending.chunks(chunk) {
        let work = || batch.par_iter().map(|(t, modes)| run_task(cfg, t, modes, out_dir)).collect::<Vec<_>>();
        let results = match &pool {
            Some(p) => p.install(work),
            None => work(),
        };
        let mut buf = String::new();
        for r in results {
            for rec in r? {
                summary.written += 1;
                summary.failed += rec.failed as usize;
                buf.push_str(&serde_json::to_string(&rec).expect("records serialize"));
                buf.push('\n');
            }
        }
        appender.write_all(buf.as_bytes()).map_err(io_err(&manifest))?;
        appender.flush().map_err(io_err(&manifest))?;
        progress(summary.skipped + summary.written, total);
    }
    Ok(summary)
}

/// Parses a manifest without touching the referenced files, in file order.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| DatasetError::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            msg: if !raw.ends_with('\n') { format!("truncated record: {e}") } else { e.to_string() },
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Parses a manifest, checks that every referenced file exists and returns
/// the records sorted by id, then mode.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, DatasetError> {
    let path = path.as_ref();
    let mut records = parse_manifest(path)?;
    let dangling = dangling_ids(path, &records);
    if !dangling.is_empty() {
        return Err(DatasetError::Dangling(dangling));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id).then(a.mode.cmp(&b.mode)));
    Ok(records)
}

fn dangling_ids(manifest: &Path, records: &[ManifestRecord]) -> Vec<String> {
    let root = manifest.parent().unwrap_or(Path::new("."));
    let ids: BTreeSet<String> = records
        .iter()
        .filter(|r| [&r.raster, &r.profile].iter().any(|p| p.as_ref().is_some_and(|p| !root.join(p).is_file())))
        .map(|r| r.id.clone())
        .collect();
    ids.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub records: usize,
    pub expected: Option<usize>,
    pub failed: usize,
    pub duplicates: Vec<String>,
    pub dangling: Vec<String>,
    /// Records from symmetric layups whose raster scores below the threshold.
    pub asymmetric: Vec<String>,
    /// Stored score differs from the score recomputed from the raster.
    pub score_mismatch: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.expected.is_none_or(|e| e == self.records)
            && self.failed == 0
            && self.duplicates.is_empty()
            && self.dangling.is_empty()
            && self.asymmetric.is_empty()
            && self.score_mismatch.is_empty()
    }
}

pub const SYMMETRY_THRESHOLD: f64 = 0.95;

/// Re-checks a manifest: file existence, record count, duplicate keys and
/// stored symmetry scores against the rasters on disk.
pub fn validate_manifest(path: impl AsRef<Path>, expected: Option<usize>) -> Result<ValidationReport, DatasetError> {
    let path = path.as_ref();
    let records = parse_manifest(path)?;
    let root = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut duplicates = Vec::new();
    let mut asymmetric = Vec::new();
    let mut score_mismatch = Vec::new();
    let dangling = dangling_ids(path, &records);
    for r in &records {
        let tag = format!("{}_{}", r.id, r.mode);
        if !seen.insert(r.key()) {
            duplicates.push(tag.clone());
        }
        if let (Some(raster), Some(stored)) = (&r.raster, r.symmetry_score) {
            if let Ok(img) = crate::polar::BinaryImage::read_pgm(root.join(raster)) {
                let score = symmetry_score(&img).score;
                if (score - stored).abs() > 1e-12 {
                    score_mismatch.push(tag.clone());
                }
                if score < SYMMETRY_THRESHOLD {
                    asymmetric.push(tag);
                }
            }
        }
    }
    Ok(ValidationReport {
        records: records.len(),
        expected,
        failed: records.iter().filter(|r| r.failed).count(),
        duplicates,
        dangling,
        asymmetric,
        score_mismatch,
    })
}
