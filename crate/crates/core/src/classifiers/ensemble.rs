//! Flat ensembles over random restarts.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::optim::TrainConfig;

/// A model giving `p(c=1 | x)`.
pub trait Classifier<X: ?Sized>: Send + Sync {
    fn predict_proba(&self, x: &X) -> Result<f64>;

    fn predict_label(&self, x: &X) -> Result<bool> {
        Ok(self.predict_proba(x)? >= 0.5)
    }
}

/// Members trained from different initial weights; predicts their mean probability.
#[derive(Debug, Clone)]
pub struct Ensemble<M> {
    members: Vec<M>,
}

impl<M> Ensemble<M> {
    pub fn new(members: Vec<M>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[M] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl<X: ?Sized, M: Classifier<X>> Classifier<X> for Ensemble<M> {
    fn predict_proba(&self, x: &X) -> Result<f64> {
        ensemble_predict(self, x)
    }
}

pub fn ensemble_predict<X: ?Sized, M: Classifier<X>>(ens: &Ensemble<M>, x: &X) -> Result<f64> {
    let mut sum = 0.0;
    for m in &ens.members {
        sum += m.predict_proba(x)?;
    }
    Ok(sum / ens.members.len() as f64)
}

/// Trains `cfg.n_init` single-restart members with `trainer`.
///
/// Member `r` starts from the same weights as restart `r` of a best-of
/// trainer run with `cfg`, so `n_init = 1` gives back the single model.
/// Members whose loss goes non-finite are dropped.
pub fn ensemble_train<D, M, F>(trainer: F, data: &D, cfg: &TrainConfig) -> Result<Ensemble<M>>
where
    D: ?Sized + Sync,
    M: Send,
    F: Fn(&D, &TrainConfig) -> Result<M> + Sync,
{
    cfg.validate()?;
    let results: Vec<Result<M>> = (0..cfg.n_init).into_par_iter().map(|r| trainer(data, &cfg.member(r))).collect();
    let mut members = Vec::with_capacity(results.len());
    let mut last_err = None;
    for r in results {
        match r {
            Ok(m) => members.push(m),
            Err(e) if e.is_numerical() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    if members.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Numerical("no ensemble member trained".into())));
    }
    Ensemble::new(members)
}
