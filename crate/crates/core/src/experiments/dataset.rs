//! Labelled datasets of simulated, noisily observed series.

use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_sde, EquilibriumSampler, SdwParams};
use crate::error::{Error, Result};
use crate::observation::{random_schedule, regular_schedule, sample_observations, signal_features, Schedule, TimeSeries};
use crate::rng::{derive_seed, rng_from_seed, stream};

use super::tasks::{sample_class_params, TaskSpec};

pub const SIM_DT: f64 = 0.01;
pub const WINDOW: (f64, f64) = (0.0, 50.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Regular,
    Random,
}

/// Observation noise level and sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsSetting {
    pub sigma: f64,
    pub isi: f64,
    #[serde(default)]
    pub schedule: ScheduleKind,
}

impl ObsSetting {
    pub fn new(sigma: f64, isi: f64) -> Self {
        ObsSetting { sigma, isi, schedule: ScheduleKind::Regular }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.isi > 0.0 && self.isi.is_finite()) {
            return Err(Error::invalid(format!("isi must be > 0, got {}", self.isi)));
        }
        Ok(())
    }

    pub fn schedule(&self, seed: u64) -> Result<Schedule> {
        match self.schedule {
            ScheduleKind::Regular => regular_schedule(self.isi, WINDOW.0, WINDOW.1),
            ScheduleKind::Random => {
                let n = ((WINDOW.1 - WINDOW.0) / self.isi).round().max(1.0) as usize;
                random_schedule(n, WINDOW.0, WINDOW.1, seed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    fn stream(&self) -> u64 {
        match self {
            Split::Train => stream::TRAIN,
            Split::Test => stream::TEST,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSeries {
    pub split: Split,
    pub index: usize,
    pub label: bool,
    pub params: SdwParams,
    pub series: TimeSeries,
}

impl LabelledSeries {
    pub fn id(&self) -> String {
        format!("{}_{:04}", self.split.name(), self.index)
    }

    /// Key used to derive this series' likelihood stream.
    pub fn key(&self) -> u64 {
        (self.split.stream() << 32) | self.index as u64
    }

    pub fn features(&self) -> [f64; 2] {
        let (mu, gamma) = signal_features(&self.series);
        [mu, gamma]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: TaskSpec,
    pub setting: ObsSetting,
    pub master_seed: u64,
    pub train: Vec<LabelledSeries>,
    pub test: Vec<LabelledSeries>,
}

fn simulate_one(task: &TaskSpec, setting: &ObsSetting, split: Split, index: usize, label: bool, master: u64) -> Result<LabelledSeries> {
    let key = |s: u64| derive_seed(master, &[split.stream(), index as u64, s]);
    let params = sample_class_params(task, label, key(stream::PARAMS))?;
    let family = task.generator;
    let x0 = EquilibriumSampler::new(&params, family)?.sample(&mut rng_from_seed(key(stream::INITIAL_STATE)));
    let traj = simulate_sde(|x| family.drift(x, &params), params.kappa, x0, SIM_DT, WINDOW.1, key(stream::DYNAMICS))?;
    let schedule = setting.schedule(key(stream::SCHEDULE))?;
    let series = sample_observations(&traj, &schedule, setting.sigma, key(stream::OBSERVATION))?;
    Ok(LabelledSeries { split, index, label, params, series })
}

fn generate_split(task: &TaskSpec, setting: &ObsSetting, split: Split, n_per_class: usize, master: u64) -> Result<Vec<LabelledSeries>> {
    (0..2 * n_per_class)
        .into_par_iter()
        .map(|i| {
            let label = i < n_per_class;
            simulate_one(task, setting, split, i, label, master).map_err(|e| Error::Simulation {
                id: format!("{}_{i:04}", split.name()),
                source: Box::new(e),
            })
        })
        .collect()
}

/// `n_per_class` series of each class for training and again for testing.
///
/// Series `i < n_per_class` carry label 1. Parameters, initial states,
/// dynamics and observation noise come from separate seed streams, so the
/// latent paths do not depend on the observation setting.
pub fn generate_dataset(task: &TaskSpec, setting: &ObsSetting, n_per_class: usize, master_seed: u64) -> Result<Dataset> {
    task.validate()?;
    setting.validate()?;
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    Ok(Dataset {
        task: task.clone(),
        setting: *setting,
        master_seed,
        train: generate_split(task, setting, Split::Train, n_per_class, master_seed)?,
        test: generate_split(task, setting, Split::Test, n_per_class, master_seed)?,
    })
}

/// `n_runs` batches of `per_class` indices per class drawn without replacement.
pub fn subsample_runs(train: &[LabelledSeries], n_runs: usize, per_class: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let pos: Vec<usize> = (0..train.len()).filter(|&i| train[i].label).collect();
    let neg: Vec<usize> = (0..train.len()).filter(|&i| !train[i].label).collect();
    if pos.len() < per_class || neg.len() < per_class {
        return Err(Error::InsufficientData(format!(
            "need {per_class} series per class, have {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    Ok((0..n_runs)
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, &[stream::SUBSAMPLE, r as u64]));
            let mut batch: Vec<usize> = pos.choose_multiple(&mut rng, per_class).copied().collect();
            batch.extend(neg.choose_multiple(&mut rng, per_class).copied());
            batch.sort_unstable();
            batch
        })
        .collect())
}

/// Splits a batch into (fit, validation) with the last `fraction` of a seeded shuffle held out.
pub fn validation_split(batch: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = batch.to_vec();
    shuffled.shuffle(&mut rng_from_seed(derive_seed(seed, &[stream::VALIDATION])));
    let n_val = ((batch.len() as f64) * fraction).round() as usize;
    let cut = batch.len() - n_val.min(batch.len());
    let val = shuffled.split_off(cut);
    (shuffled, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SeriesEntry {
    id: String,
    split: Split,
    index: usize,
    label: bool,
    params: SdwParams,
    file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetManifest {
    task: TaskSpec,
    setting: ObsSetting,
    master_seed: u64,
    series: Vec<SeriesEntry>,
}

pub const DATASET_MANIFEST: &str = "dataset.json";

impl Dataset {
    pub fn all(&self) -> impl Iterator<Item = &LabelledSeries> {
        self.train.iter().chain(&self.test)
    }

    /// Writes `<split>/<id>.csv` per series and a JSON manifest.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut series = Vec::new();
        for split in [Split::Train, Split::Test] {
            let sub = dir.join(split.name());
            fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        }
        for s in self.all() {
            let file = format!("{}/{}.csv", s.split.name(), s.id());
            s.series.write_csv(&dir.join(&file))?;
            series.push(SeriesEntry { id: s.id(), split: s.split, index: s.index, label: s.label, params: s.params, file });
        }
        let manifest = DatasetManifest { task: self.task.clone(), setting: self.setting, master_seed: self.master_seed, series };
        let path = dir.join(DATASET_MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(DATASET_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for e in m.series {
            let series = TimeSeries::read_csv(&dir.join(&e.file), m.setting.sigma)?;
            let s = LabelledSeries { split: e.split, index: e.index, label: e.label, params: e.params, series };
            match e.split {
                Split::Train => train.push(s),
                Split::Test => test.push(s),
            }
        }
        Ok(Dataset { task: m.task, setting: m.setting, master_seed: m.master_seed, train, test })
    }
}

#[cfg(test)]
mod tests {
    use super::super::tasks::task_by_name;
    use super::*;

    #[test]
    fn small_dataset_shape_and_determinism() {
        let task = task_by_name("task2").unwrap();
        let setting = ObsSetting::new(0.3, 0.5);
        let a = generate_dataset(&task, &setting, 3, 42).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (6, 6));
        assert_eq!(a.train.iter().filter(|s| s.label).count(), 3);
        assert!(a.all().all(|s| s.series.len() == 100));
        assert_eq!(a, generate_dataset(&task, &setting, 3, 42).unwrap());
        assert_ne!(a.train[0].series.values, a.test[0].series.values);
    }

    #[test]
    fn batches_are_balanced_without_duplicates() {
        let task = task_by_name("task1").unwrap();
        let d = generate_dataset(&task, &ObsSetting::new(0.3, 5.0), 6, 1).unwrap();
        let runs = subsample_runs(&d.train, 4, 4, 9).unwrap();
        for b in &runs {
            assert_eq!(b.len(), 8);
            assert_eq!(b.iter().filter(|&&i| d.train[i].label).count(), 4);
            let mut u = b.clone();
            u.dedup();
            assert_eq!(u.len(), 8);
        }
        assert!(runs.windows(2).any(|w| w[0] != w[1]));
        assert!(subsample_runs(&d.train, 1, 7, 9).is_err());
        let (fit, val) = validation_split(&runs[0], 0.25, 3);
        assert_eq!((fit.len(), val.len()), (6, 2));
    }

    #[test]
    fn write_read_round_trip() {
        let task = task_by_name("task3").unwrap();
        let d = generate_dataset(&task, &ObsSetting::new(0.4, 2.0), 2, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write(dir.path()).unwrap();
        assert_eq!(Dataset::read(dir.path()).unwrap(), d);
    }
}
