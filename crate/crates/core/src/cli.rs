//! Command-line front end: `generate`, `infer`, `train`, `sweep`, `stats`, `report`.
//!
//! Every command reads one JSON [`RunConfig`] (flags override its scalar
//! fields) and writes only below the configured output directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{ClassifierKind, TrainConfig};
use crate::error::{Error, Result};
use crate::experiments::results::{read_results, write_results, write_selections, write_signrank, write_summary};
use crate::experiments::{
    generate_dataset, run_on_dataset, signrank_table, subsample_runs, summarize, task_by_name, train_classifier, Dataset,
    Example, ExperimentConfig, FeatureCache, ObsSetting, PosteriorCache, PosteriorSet, Split,
};
use crate::inference::{sdw_default_grid, GridPosterior, ParamGrid, ParticleFilterConfig, SdwPosteriorEngine};
use crate::rng::{derive_seed, stream};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

const DATASET_DIR: &str = "dataset";
const POSTERIOR_DIR: &str = "posteriors";
const MODEL_DIR: &str = "models";
const POSTERIOR_MANIFEST: &str = "posteriors.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const SELECTION_FILE: &str = "selection.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SIGNRANK_FILE: &str = "signrank.csv";

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: String,
    pub setting: ObsSetting,
    pub classifiers: Vec<ClassifierKind>,
    /// Values per classifier; classifiers missing here use their headline value.
    pub hyperparams: BTreeMap<ClassifierKind, Vec<f64>>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub n_particles: usize,
    pub grid: Option<ParamGrid>,
    pub n_per_class: usize,
    pub n_runs: usize,
    pub batch_per_class: usize,
    pub validation_fraction: f64,
    pub train: TrainConfig,
    /// Resample run whose batch `train` fits.
    pub train_run: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        RunConfig {
            task: "task2".into(),
            setting: ObsSetting::new(0.3, 0.5),
            classifiers: ClassifierKind::ALL.to_vec(),
            hyperparams: BTreeMap::new(),
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            n_particles: 256,
            grid: None,
            n_per_class: exp.n_per_class,
            n_runs: exp.n_runs,
            batch_per_class: exp.batch_per_class,
            validation_fraction: exp.validation_fraction,
            train: exp.train,
            train_run: 0,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
    }

    /// Checks every field before any work is done.
    pub fn validate(&self) -> Result<()> {
        task_by_name(&self.task)?;
        self.setting.validate().map_err(|e| field("setting", e))?;
        if self.classifiers.is_empty() {
            return Err(Error::invalid("classifiers: list is empty"));
        }
        for (k, hs) in &self.hyperparams {
            if !self.classifiers.contains(k) {
                return Err(Error::invalid(format!("hyperparams: {k} is not in classifiers")));
            }
            if hs.is_empty() {
                return Err(Error::invalid(format!("hyperparams: empty list for {k}")));
            }
            for &h in hs {
                k.kernel(h).validate().map_err(|e| field("hyperparams", e))?;
            }
        }
        if let Some(g) = &self.grid {
            ParamGrid::new(g.names().to_vec(), g.axes().to_vec()).map_err(|e| field("grid", e))?;
            if g.names() != ["d", "kappa", "a"] {
                return Err(Error::invalid("grid: axes must be named d, kappa, a"));
            }
        }
        if self.train_run >= self.n_runs {
            return Err(Error::invalid(format!("train_run: {} but only {} runs", self.train_run, self.n_runs)));
        }
        self.experiment().validate()
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            n_per_class: self.n_per_class,
            n_runs: self.n_runs,
            batch_per_class: self.batch_per_class,
            validation_fraction: self.validation_fraction,
            train: self.train,
            n_particles: self.n_particles,
            master_seed: self.seed,
            threads: self.threads,
        }
    }

    pub fn hyperparams(&self) -> BTreeMap<ClassifierKind, Vec<f64>> {
        self.classifiers
            .iter()
            .map(|k| (*k, self.hyperparams.get(k).cloned().unwrap_or_else(|| vec![k.default_hyperparam()])))
            .collect()
    }

    pub fn grid(&self) -> Arc<ParamGrid> {
        Arc::new(self.grid.clone().unwrap_or_else(sdw_default_grid))
    }

    /// SHA-256 of the config with the fields that cannot change outputs removed.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.threads = None;
        c.out = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_vec(&c)?);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn field(name: &str, e: Error) -> Error {
    Error::invalid(format!("{name}: {e}"))
}

/// Written next to every output set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    fn new(cmd: &str, cfg: &RunConfig, outputs: Vec<String>) -> Result<Self> {
        let seeds = [
            ("subsample", derive_seed(cfg.seed, &[stream::SUBSAMPLE])),
            ("likelihood", derive_seed(cfg.seed, &[stream::LIKELIHOOD])),
            ("train_init", cfg.train.init_seed),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let mut config = cfg.clone();
        config.threads = None;
        config.out = PathBuf::new();
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: cmd.into(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            seeds,
            config,
            outputs,
        })
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found; run the upstream command first"))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PosteriorManifest {
    grid_hash: String,
    grid: ParamGrid,
    n_particles: usize,
    seed: u64,
    train: Vec<String>,
    test: Vec<String>,
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let dir = cfg.out.join(DATASET_DIR);
    require(&dir.join(crate::experiments::dataset::DATASET_MANIFEST), "dataset")?;
    let data = Dataset::read(&dir)?;
    if data.master_seed != cfg.seed {
        return Err(Error::invalid(format!("seed: config has {}, dataset was generated with {}", cfg.seed, data.master_seed)));
    }
    if data.task.name != cfg.task || data.setting != cfg.setting {
        return Err(Error::invalid("task/setting: config differs from the generated dataset"));
    }
    Ok(data)
}

fn load_posteriors(cfg: &RunConfig, data: &Dataset) -> Result<PosteriorSet> {
    let dir = cfg.out.join(POSTERIOR_DIR);
    let mpath = dir.join(POSTERIOR_MANIFEST);
    require(&mpath, "posteriors")?;
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let m: PosteriorManifest = serde_json::from_str(&text)?;
    let grid = cfg.grid();
    if m.grid_hash != grid.fingerprint() {
        return Err(Error::GridMismatch(format!("posteriors were computed on grid {}, config grid is {}", m.grid_hash, grid.fingerprint())));
    }
    if m.seed != cfg.seed {
        return Err(Error::invalid(format!("seed: config has {}, posteriors were inferred with {}", cfg.seed, m.seed)));
    }
    let read = |split: Split, series: &[crate::experiments::LabelledSeries]| -> Result<Vec<Arc<GridPosterior>>> {
        series
            .iter()
            .map(|s| {
                let p = dir.join(split.name()).join(format!("{}.csv", s.id()));
                require(&p, "posterior file")?;
                GridPosterior::read_csv(&p, grid.clone()).map(Arc::new)
            })
            .collect()
    };
    Ok(PosteriorSet { train: read(Split::Train, &data.train)?, test: read(Split::Test, &data.test)? })
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let task = task_by_name(&cfg.task)?;
    let data = generate_dataset(&task, &cfg.setting, cfg.n_per_class, cfg.seed)?;
    let dir = cfg.out.join(DATASET_DIR);
    create_dir(&dir)?;
    data.write(&dir)?;
    Manifest::new("generate", cfg, vec![format!("{DATASET_DIR}/{}", crate::experiments::dataset::DATASET_MANIFEST)])?
        .write(&dir.join("manifest.json"))
}

pub fn cmd_infer(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let grid = cfg.grid();
    let engine = SdwPosteriorEngine::new(grid.clone(), ParticleFilterConfig::with_particles(cfg.n_particles))?;
    let posts = PosteriorCache::new(engine, cfg.seed).posteriors(&data)?;
    let dir = cfg.out.join(POSTERIOR_DIR);
    for (split, series, ps) in [(Split::Train, &data.train, &posts.train), (Split::Test, &data.test, &posts.test)] {
        let sub = dir.join(split.name());
        create_dir(&sub)?;
        for (s, p) in series.iter().zip(ps) {
            p.write_csv(&sub.join(format!("{}.csv", s.id())))?;
        }
    }
    let m = PosteriorManifest {
        grid_hash: grid.fingerprint(),
        grid: (*grid).clone(),
        n_particles: cfg.n_particles,
        seed: cfg.seed,
        train: data.train.iter().map(|s| s.id()).collect(),
        test: data.test.iter().map(|s| s.id()).collect(),
    };
    write_json(&dir.join(POSTERIOR_MANIFEST), &m)?;
    Manifest::new("infer", cfg, vec![format!("{POSTERIOR_DIR}/{POSTERIOR_MANIFEST}")])?.write(&dir.join("manifest.json"))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let posts = load_posteriors(cfg, &data)?;
    let (train, _) = crate::experiments::protocol::examples(&data, &posts);
    let exp = cfg.experiment();
    let batches = subsample_runs(&data.train, exp.n_runs, exp.batch_per_class, derive_seed(cfg.seed, &[stream::SUBSAMPLE]))?;
    let batch_idx = &batches[cfg.train_run];
    let batch: Vec<&Example> = batch_idx.iter().map(|&i| &train[i]).collect();
    let ids: Vec<String> = batch_idx.iter().map(|&i| data.train[i].id()).collect();
    let dir = cfg.out.join(MODEL_DIR);
    create_dir(&dir)?;
    let features = FeatureCache::default();
    let mut outputs = Vec::new();
    for (kind, hs) in cfg.hyperparams() {
        let model = train_classifier(kind, hs[0], &batch, &exp.run_train_config(cfg.train_run), &features)?;
        let name = format!("{kind}.json");
        model.document(ids.clone()).write(&dir.join(&name))?;
        outputs.push(format!("{MODEL_DIR}/{name}"));
    }
    Manifest::new("train", cfg, outputs)?.write(&dir.join("manifest.json"))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let posts = load_posteriors(cfg, &data)?;
    let res = run_on_dataset(&data, &posts, &cfg.hyperparams(), &cfg.experiment())?;
    write_results(&cfg.out.join(RESULTS_FILE), &res.rows)?;
    let mut outputs = vec![RESULTS_FILE.to_string()];
    if !res.selections.is_empty() {
        write_selections(&cfg.out.join(SELECTION_FILE), &res.selections)?;
        outputs.push(SELECTION_FILE.into());
    }
    Manifest::new("sweep", cfg, outputs)?.write(&cfg.out.join("manifest_sweep.json"))
}

fn load_results(cfg: &RunConfig) -> Result<Vec<crate::experiments::ResultRow>> {
    let path = cfg.out.join(RESULTS_FILE);
    require(&path, "results")?;
    read_results(&path)
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    let rows = load_results(cfg)?;
    write_signrank(&cfg.out.join(SIGNRANK_FILE), &signrank_table(&rows)?)?;
    Manifest::new("stats", cfg, vec![SIGNRANK_FILE.into()])?.write(&cfg.out.join("manifest_stats.json"))
}

pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let rows = load_results(cfg)?;
    write_summary(&cfg.out.join(SUMMARY_FILE), &summarize(&rows))?;
    Manifest::new("report", cfg, vec![SUMMARY_FILE.into()])?.write(&cfg.out.join("manifest_report.json"))
}

#[derive(Debug, Parser)]
#[command(name = "lims", version, about = "Classify partially observed dynamical systems in model space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (overrides the config).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate the labelled train and test series.
    Generate,
    /// Compute a grid posterior for every series.
    Infer,
    /// Fit one ensemble per classifier on one resampled batch.
    Train,
    /// Run the resampling protocol and write per-run accuracies.
    Sweep,
    /// Sign-rank tests over the sweep results.
    Stats,
    /// Mean and standard deviation over the sweep results.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Infer => "infer",
            Command::Train => "train",
            Command::Sweep => "sweep",
            Command::Stats => "stats",
            Command::Report => "report",
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        return EXIT_NUMERICAL;
    }
    match e {
        Error::Io { .. } | Error::Csv(_) | Error::Format { .. } | Error::GridMismatch(_) => EXIT_MISSING_INPUT,
        _ => EXIT_CONFIG,
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            require(p, "config file").map_err(|_| Error::invalid(format!("config: {} does not exist", p.display())))?;
            RunConfig::from_file(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<()> {
    let run = || match command {
        Command::Generate => cmd_generate(cfg),
        Command::Infer => cmd_infer(cfg),
        Command::Train => cmd_train(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Stats => cmd_stats(cfg),
        Command::Report => cmd_report(cfg),
    };
    match cfg.threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("threads: {e}")))?
            .install(run),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = resolve_config(&cli).and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("lims {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
