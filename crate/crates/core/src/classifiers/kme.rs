//! Kernel mean embedding classifier with one weight per grid point.
//!
//! The score of a posterior is `sum_n w_n <mu_pi, k(., theta_n)>`, i.e. the
//! smoothed field `K w` averaged under the posterior.

use std::borrow::Borrow;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::inference::{GridPosterior, ParamGrid};

use super::ensemble::{Classifier, Ensemble};
use super::kernel::{GridFeatures, KernelConfig};
use super::optim::{all_restarts, best_of_restarts, check_labels, clamped_neg_ln, sigmoid, Objective, TrainConfig};

#[derive(Debug, Clone)]
pub struct KmeModel {
    features: Arc<GridFeatures>,
    w: Vec<f64>,
    field: Vec<f64>,
}

impl KmeModel {
    pub fn new(features: Arc<GridFeatures>, w: Vec<f64>) -> Result<Self> {
        if w.len() != features.len() {
            return Err(Error::invalid(format!("{} weights for {} grid points", w.len(), features.len())));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite model weight".into()));
        }
        let field = features.field_exact(&w);
        Ok(KmeModel { features, w, field })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn grid(&self) -> &Arc<ParamGrid> {
        self.features.grid()
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig::Rho(self.features.rho())
    }

    pub fn score(&self, post: &GridPosterior) -> Result<f64> {
        if !(Arc::ptr_eq(post.grid(), self.grid()) || post.grid() == self.grid()) {
            return Err(Error::GridMismatch("posterior grid differs from the model's grid".into()));
        }
        Ok(post.support().fold(0.0, |acc, (n, p)| acc + p * self.field[n]))
    }
}

pub fn kme_predict(model: &KmeModel, post: &GridPosterior) -> Result<f64> {
    Ok(sigmoid(model.score(post)?))
}

/// Cross-entropy of the grid-weighted embedding classifier.
pub struct KmeObjective<'a> {
    features: &'a GridFeatures,
    posts: Vec<(Vec<usize>, Vec<f64>)>,
    labels: Vec<bool>,
}

impl<'a> KmeObjective<'a> {
    pub fn new<P: Borrow<GridPosterior>>(features: &'a GridFeatures, data: &[(P, bool)]) -> Result<Self> {
        let labels: Vec<bool> = data.iter().map(|(_, c)| *c).collect();
        check_labels(&labels)?;
        let mut posts = Vec::with_capacity(data.len());
        for (p, _) in data {
            let p = p.borrow();
            if !(Arc::ptr_eq(p.grid(), features.grid()) || p.grid() == features.grid()) {
                return Err(Error::GridMismatch("training posterior on a different grid".into()));
            }
            posts.push(p.support().unzip());
        }
        Ok(KmeObjective { features, posts, labels })
    }

    fn loss_from_field(&self, field: &[f64], dfield: Option<&mut [f64]>) -> f64 {
        let mut loss = 0.0;
        let mut dfield = dfield;
        if let Some(d) = dfield.as_deref_mut() {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        for ((idx, pi), &c) in self.posts.iter().zip(&self.labels) {
            let a = idx.iter().zip(pi).fold(0.0, |acc, (&n, &p)| acc + p * field[n]);
            let z = sigmoid(a);
            loss += clamped_neg_ln(if c { z } else { sigmoid(-a) });
            if let Some(d) = dfield.as_deref_mut() {
                let r = if c { z - 1.0 } else { z };
                for (&n, &p) in idx.iter().zip(pi) {
                    d[n] += r * p;
                }
            }
        }
        loss
    }
}

impl Objective for KmeObjective<'_> {
    fn dim(&self) -> usize {
        self.features.len()
    }

    fn loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let m = self.features.len();
        let mut field = vec![0.0; m];
        self.features.apply(w, &mut field);
        let mut g = vec![0.0; m];
        let loss = self.loss_from_field(&field, Some(&mut g));
        self.features.apply(&g, grad);
        loss
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let mut field = vec![0.0; self.features.len()];
        self.features.apply(w, &mut field);
        self.loss_from_field(&field, None)
    }
}

pub fn kme_train_with<P: Borrow<GridPosterior>>(features: Arc<GridFeatures>, data: &[(P, bool)], cfg: &TrainConfig) -> Result<KmeModel> {
    let w = best_of_restarts(&KmeObjective::new(&features, data)?, cfg)?;
    KmeModel::new(features, w)
}

pub fn kme_train<P: Borrow<GridPosterior>>(data: &[(P, bool)], cfg: &TrainConfig, kernel: KernelConfig) -> Result<KmeModel> {
    let grid = data
        .first()
        .ok_or_else(|| Error::InsufficientData("no training examples".into()))?
        .0
        .borrow()
        .grid()
        .clone();
    kme_train_with(Arc::new(GridFeatures::new(grid, kernel.rho()?)?), data, cfg)
}

pub fn kme_train_ensemble<P: Borrow<GridPosterior>>(
    features: Arc<GridFeatures>,
    data: &[(P, bool)],
    cfg: &TrainConfig,
) -> Result<Ensemble<KmeModel>> {
    let ws = all_restarts(&KmeObjective::new(&features, data)?, cfg)?;
    Ensemble::new(ws.into_iter().map(|w| KmeModel::new(features.clone(), w)).collect::<Result<_>>()?)
}

impl Classifier<GridPosterior> for KmeModel {
    fn predict_proba(&self, post: &GridPosterior) -> Result<f64> {
        kme_predict(self, post)
    }
}
