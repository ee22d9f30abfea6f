//! Resampled training batches, classifier training and test accuracy.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    bklr_train_ensemble, gram_ensemble_predict, gram_train_ensemble, kme_train_ensemble, lims_train_ensemble, map_train_ensemble, BklrModel,
    Classifier, ClassifierKind, Ensemble, GramKind, GramModel, GridFeatures, KmeModel, LimsModel, MapClassifier, ModelDocument,
    TrainConfig,
};
use crate::error::{Error, Result};
use crate::inference::{sdw_default_grid, GridPosterior, ParamGrid, ParticleFilterConfig, SdwPosteriorEngine};
use crate::rng::{derive_seed, stream};

use super::cache::{PosteriorCache, PosteriorSet};
use super::dataset::{generate_dataset, subsample_runs, validation_split, Dataset, ObsSetting};
use super::results::{ResultRow, RunResult, SelectionRow};
use super::tasks::TaskSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_per_class: usize,
    pub n_runs: usize,
    pub batch_per_class: usize,
    pub validation_fraction: f64,
    pub train: TrainConfig,
    pub n_particles: usize,
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_per_class: 100,
            n_runs: 10,
            batch_per_class: 45,
            validation_fraction: 0.2,
            train: TrainConfig::default(),
            n_particles: 512,
            master_seed: 0,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.n_runs == 0 || self.batch_per_class == 0 {
            return Err(Error::invalid("n_runs and batch_per_class must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation_fraction must lie in [0, 1)"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be >= 1"));
        }
        self.filter().validate()
    }

    pub fn filter(&self) -> ParticleFilterConfig {
        ParticleFilterConfig::with_particles(self.n_particles)
    }

    /// Initial-weight seed of resample run `run`.
    pub fn run_train_config(&self, run: usize) -> TrainConfig {
        TrainConfig { init_seed: derive_seed(self.master_seed, &[stream::INIT, self.train.init_seed, run as u64]), ..self.train }
    }
}

/// Hyperparameter values per classifier.
pub type Hyperparams = BTreeMap<ClassifierKind, Vec<f64>>;

/// Headline value for each requested classifier.
pub fn headline_hyperparams(kinds: &[ClassifierKind]) -> Hyperparams {
    kinds.iter().map(|k| (*k, vec![k.default_hyperparam()])).collect()
}

/// One training or test example.
#[derive(Debug, Clone)]
pub struct Example {
    pub post: Arc<GridPosterior>,
    pub features: [f64; 2],
    pub label: bool,
}

pub fn examples(data: &Dataset, posts: &PosteriorSet) -> (Vec<Example>, Vec<Example>) {
    let zip = |s: &[super::dataset::LabelledSeries], p: &[Arc<GridPosterior>]| {
        s.iter()
            .zip(p)
            .map(|(s, p)| Example { post: p.clone(), features: s.features(), label: s.label })
            .collect::<Vec<_>>()
    };
    (zip(&data.train, &posts.train), zip(&data.test, &posts.test))
}

/// A trained ensemble of any kind.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Lims(Ensemble<LimsModel>),
    Map(Ensemble<MapClassifier>),
    Kme(Ensemble<KmeModel>),
    Gram(Ensemble<GramModel>),
    Bklr(Ensemble<BklrModel>),
}

impl TrainedModel {
    pub fn predict(&self, ex: &Example) -> Result<f64> {
        match self {
            TrainedModel::Lims(e) => e.predict_proba(&*ex.post),
            TrainedModel::Map(e) => e.predict_proba(&*ex.post),
            TrainedModel::Kme(e) => e.predict_proba(&*ex.post),
            TrainedModel::Gram(e) => gram_ensemble_predict(e, &ex.post),
            TrainedModel::Bklr(e) => e.predict_proba(&ex.features),
        }
    }

    pub fn accuracy(&self, test: &[&Example]) -> Result<f64> {
        let mut hits = 0usize;
        for ex in test {
            if (self.predict(ex)? >= 0.5) == ex.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / test.len() as f64)
    }

    pub fn document(&self, training_ids: Vec<String>) -> ModelDocument {
        match self {
            TrainedModel::Lims(e) => ModelDocument::from_lims(e),
            TrainedModel::Map(e) => ModelDocument::from_map(e),
            TrainedModel::Kme(e) => ModelDocument::from_kme(e),
            TrainedModel::Gram(e) => ModelDocument::from_gram(e, training_ids),
            TrainedModel::Bklr(e) => ModelDocument::from_bklr(e),
        }
    }
}

/// Shares Gaussian grid features between jobs with the same width.
#[derive(Default)]
pub struct FeatureCache {
    map: std::sync::Mutex<BTreeMap<u64, Arc<GridFeatures>>>,
}

impl FeatureCache {
    pub fn get(&self, grid: &Arc<ParamGrid>, rho: f64) -> Result<Arc<GridFeatures>> {
        let mut map = self.map.lock().expect("feature cache lock");
        if let Some(f) = map.get(&rho.to_bits()) {
            if Arc::ptr_eq(f.grid(), grid) || **f.grid() == **grid {
                return Ok(f.clone());
            }
        }
        let f = Arc::new(GridFeatures::new(grid.clone(), rho)?);
        map.insert(rho.to_bits(), f.clone());
        Ok(f)
    }
}

pub fn train_classifier(
    kind: ClassifierKind,
    hyper: f64,
    train: &[&Example],
    cfg: &TrainConfig,
    features: &FeatureCache,
) -> Result<TrainedModel> {
    let kernel = kind.kernel(hyper);
    kernel.validate()?;
    let posts: Vec<(&GridPosterior, bool)> = train.iter().map(|e| (&*e.post, e.label)).collect();
    let grid = || -> Result<Arc<ParamGrid>> {
        Ok(train.first().ok_or_else(|| Error::InsufficientData("empty training batch".into()))?.post.grid().clone())
    };
    Ok(match kind {
        ClassifierKind::Lims => TrainedModel::Lims(lims_train_ensemble(features.get(&grid()?, hyper)?, &posts, cfg)?),
        ClassifierKind::Map => TrainedModel::Map(map_train_ensemble(features.get(&grid()?, hyper)?, &posts, cfg)?),
        ClassifierKind::Ppk => TrainedModel::Gram(gram_train_ensemble(&posts, GramKind::Ppk, cfg, kernel)?),
        ClassifierKind::Kme => TrainedModel::Kme(kme_train_ensemble(features.get(&grid()?, hyper)?, &posts, cfg)?),
        ClassifierKind::Bklr => {
            let feats: Vec<[f64; 2]> = train.iter().map(|e| e.features).collect();
            let labels: Vec<bool> = train.iter().map(|e| e.label).collect();
            TrainedModel::Bklr(bklr_train_ensemble(&feats, &labels, cfg, kernel)?)
        }
    })
}

/// Builds the double-well engine on the default grid.
pub fn default_engine(cfg: &ExperimentConfig) -> Result<SdwPosteriorEngine> {
    SdwPosteriorEngine::new(Arc::new(sdw_default_grid()), cfg.filter())
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?
            .install(f),
    }
}

/// Generates the dataset, infers every posterior and runs the classifier protocol.
pub fn run_experiment(task: &TaskSpec, setting: &ObsSetting, hyper: &Hyperparams, cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let cache = PosteriorCache::new(default_engine(cfg)?, cfg.master_seed);
    run_experiment_cached(task, setting, hyper, cfg, &cache)
}

pub fn run_experiment_cached(
    task: &TaskSpec,
    setting: &ObsSetting,
    hyper: &Hyperparams,
    cfg: &ExperimentConfig,
    cache: &PosteriorCache,
) -> Result<RunResult> {
    cfg.validate()?;
    with_pool(cfg.threads, || {
        let data = generate_dataset(task, setting, cfg.n_per_class, cfg.master_seed)?;
        let posts = cache.posteriors(&data)?;
        evaluate(&data, &posts, hyper, cfg)
    })
}

/// Runs the protocol on an existing dataset and its posteriors.
pub fn run_on_dataset(data: &Dataset, posts: &PosteriorSet, hyper: &Hyperparams, cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    with_pool(cfg.threads, || evaluate(data, posts, hyper, cfg))
}

fn evaluate(data: &Dataset, posts: &PosteriorSet, hyper: &Hyperparams, cfg: &ExperimentConfig) -> Result<RunResult> {
    if hyper.is_empty() {
        return Err(Error::invalid("no classifiers requested"));
    }
    for (k, hs) in hyper {
        if hs.is_empty() {
            return Err(Error::invalid(format!("empty hyperparameter list for {k}")));
        }
        for &h in hs {
            k.kernel(h).validate()?;
        }
    }
    let (train, test) = examples(data, posts);
    let test_refs: Vec<&Example> = test.iter().collect();
    let batches = subsample_runs(&data.train, cfg.n_runs, cfg.batch_per_class, derive_seed(cfg.master_seed, &[stream::SUBSAMPLE]))?;
    let features = FeatureCache::default();

    let jobs: Vec<(usize, ClassifierKind, f64)> = (0..cfg.n_runs)
        .flat_map(|r| hyper.iter().flat_map(move |(k, hs)| hs.iter().map(move |h| (r, *k, *h))))
        .collect();
    let accs: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, kind, h)| {
            let batch: Vec<&Example> = batches[r].iter().map(|&i| &train[i]).collect();
            train_classifier(kind, h, &batch, &cfg.run_train_config(r), &features)?.accuracy(&test_refs)
        })
        .collect::<Result<_>>()?;

    let batch_entropy = |r: usize| batches[r].iter().map(|&i| train[i].post.entropy()).sum::<f64>() / batches[r].len() as f64;
    let rows: Vec<ResultRow> = jobs
        .iter()
        .zip(&accs)
        .map(|(&(r, kind, h), &accuracy)| ResultRow {
            task: data.task.name.clone(),
            setting_sigma: data.setting.sigma,
            setting_isi: data.setting.isi,
            classifier: kind,
            hyperparam: h,
            run: r,
            accuracy,
            entropy: batch_entropy(r),
        })
        .collect();

    let selections = select_hyperparams(data, &train, &batches, hyper, cfg, &features, &rows)?;

    Ok(RunResult {
        task: data.task.name.clone(),
        setting: data.setting,
        master_seed: cfg.master_seed,
        mean_entropy: posts.mean_entropy(),
        batches,
        rows,
        selections,
    })
}

/// For classifiers with several hyperparameter values, picks one per run by
/// accuracy on the held-out part of the batch (first listed value wins ties).
fn select_hyperparams(
    data: &Dataset,
    train: &[Example],
    batches: &[Vec<usize>],
    hyper: &Hyperparams,
    cfg: &ExperimentConfig,
    features: &FeatureCache,
    rows: &[ResultRow],
) -> Result<Vec<SelectionRow>> {
    let jobs: Vec<(usize, ClassifierKind, f64)> = (0..batches.len())
        .flat_map(|r| hyper.iter().filter(|(_, hs)| hs.len() > 1).flat_map(move |(k, hs)| hs.iter().map(move |h| (r, *k, *h))))
        .collect();
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = batches
        .iter()
        .enumerate()
        .map(|(r, b)| validation_split(b, cfg.validation_fraction, derive_seed(cfg.master_seed, &[stream::VALIDATION, r as u64])))
        .collect();
    let val_accs: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, kind, h)| {
            let (fit, val) = &splits[r];
            let fit: Vec<&Example> = fit.iter().map(|&i| &train[i]).collect();
            let val: Vec<&Example> = val.iter().map(|&i| &train[i]).collect();
            if val.is_empty() {
                return Err(Error::InsufficientData("validation split is empty".into()));
            }
            train_classifier(kind, h, &fit, &cfg.run_train_config(r), features)?.accuracy(&val)
        })
        .collect::<Result<_>>()?;
    let mut best: BTreeMap<(usize, ClassifierKind), (f64, f64)> = BTreeMap::new();
    for (&(r, kind, h), &acc) in jobs.iter().zip(&val_accs) {
        let e = best.entry((r, kind)).or_insert((h, acc));
        if acc > e.1 {
            *e = (h, acc);
        }
    }
    Ok(best
        .into_iter()
        .map(|((r, kind), (h, val))| {
            let test = rows
                .iter()
                .find(|row| row.run == r && row.classifier == kind && row.hyperparam == h)
                .map(|row| row.accuracy)
                .expect("every swept value has a result row");
            SelectionRow {
                task: data.task.name.clone(),
                setting_sigma: data.setting.sigma,
                setting_isi: data.setting.isi,
                classifier: kind,
                run: r,
                selected: h,
                validation_accuracy: val,
                accuracy: test,
            }
        })
        .collect())
}
