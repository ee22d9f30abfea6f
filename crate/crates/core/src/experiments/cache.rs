//! In-memory posterior cache keyed by series content.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::Result;
use crate::inference::{GridPosterior, SdwPosteriorEngine};

use super::dataset::{Dataset, LabelledSeries};

/// Posteriors of one dataset, aligned with its train and test vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSet {
    pub train: Vec<Arc<GridPosterior>>,
    pub test: Vec<Arc<GridPosterior>>,
}

impl PosteriorSet {
    pub fn mean_entropy(&self) -> f64 {
        let all: Vec<f64> = self.train.iter().chain(&self.test).map(|p| p.entropy()).collect();
        all.iter().sum::<f64>() / all.len() as f64
    }
}

/// Runs the grid posterior engine at most once per distinct series.
pub struct PosteriorCache {
    engine: SdwPosteriorEngine,
    master_seed: u64,
    entries: Mutex<HashMap<(u64, u64), Arc<GridPosterior>>>,
}

fn content_hash(s: &LabelledSeries) -> u64 {
    let mut h = DefaultHasher::new();
    s.series.sigma.to_bits().hash(&mut h);
    for (t, y) in s.series.times().iter().zip(&s.series.values) {
        t.to_bits().hash(&mut h);
        y.to_bits().hash(&mut h);
    }
    h.finish()
}

impl PosteriorCache {
    pub fn new(engine: SdwPosteriorEngine, master_seed: u64) -> Self {
        PosteriorCache { engine, master_seed, entries: Mutex::new(HashMap::new()) }
    }

    pub fn engine(&self) -> &SdwPosteriorEngine {
        &self.engine
    }

    /// Likelihood evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.engine.evaluations()
    }

    pub fn posterior(&self, s: &LabelledSeries) -> Result<Arc<GridPosterior>> {
        let key = (s.key(), content_hash(s));
        if let Some(p) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.engine.infer(&s.series, s.key(), self.master_seed)?);
        self.entries.lock().expect("cache lock").insert(key, p.clone());
        Ok(p)
    }

    pub fn posteriors(&self, data: &Dataset) -> Result<PosteriorSet> {
        let run = |v: &[LabelledSeries]| v.par_iter().map(|s| self.posterior(s)).collect::<Result<Vec<_>>>();
        Ok(PosteriorSet { train: run(&data.train)?, test: run(&data.test)? })
    }
}
