//! Kernel logistic regression with distribution kernels as features.

use std::borrow::Borrow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{GridPosterior, ParamGrid};

use super::ensemble::{Classifier, Ensemble};
use super::kernel::{compensated_sum, GridFeatures, KernelConfig};
use super::optim::{all_restarts, best_of_restarts, dot, sigmoid, FeatureKlr, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GramKind {
    Ppk,
    Kme,
}

/// Training posteriors prepared for fast kernel rows.
///
/// For PPK each entry holds `pi_i^alpha`; for KME it holds the smoothed
/// mass `K pi_i`, so that a kernel value is one inner product.
#[derive(Debug)]
pub struct GramBasis {
    kind: GramKind,
    kernel: KernelConfig,
    grid: Arc<ParamGrid>,
    prepared: Vec<Vec<f64>>,
}

impl GramBasis {
    pub fn new<P: Borrow<GridPosterior>>(kind: GramKind, kernel: KernelConfig, posts: &[P]) -> Result<Self> {
        let first = posts.first().ok_or_else(|| Error::InsufficientData("no training posteriors".into()))?.borrow();
        for p in posts {
            first.same_grid(p.borrow())?;
        }
        let grid = first.grid().clone();
        let prepared = match kind {
            GramKind::Ppk => {
                let alpha = kernel.alpha()?;
                posts.iter().map(|p| p.borrow().weights().iter().map(|w| w.powf(alpha)).collect()).collect()
            }
            GramKind::Kme => {
                let f = GridFeatures::new(grid.clone(), kernel.rho()?)?;
                posts
                    .iter()
                    .map(|p| {
                        let mut out = vec![0.0; f.len()];
                        f.apply(p.borrow().weights(), &mut out);
                        out
                    })
                    .collect()
            }
        };
        Ok(GramBasis { kind, kernel, grid, prepared })
    }

    pub fn kind(&self) -> GramKind {
        self.kind
    }

    pub fn kernel(&self) -> KernelConfig {
        self.kernel
    }

    pub fn grid(&self) -> &Arc<ParamGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    /// `[K(post, pi_1), ..., K(post, pi_N)]`.
    pub fn row(&self, post: &GridPosterior) -> Result<Vec<f64>> {
        if !(Arc::ptr_eq(post.grid(), &self.grid) || **post.grid() == *self.grid) {
            return Err(Error::GridMismatch("posterior grid differs from the training grid".into()));
        }
        let support: Vec<(usize, f64)> = match self.kind {
            GramKind::Ppk => {
                let alpha = self.kernel.value();
                post.support().map(|(n, w)| (n, w.powf(alpha))).collect()
            }
            GramKind::Kme => post.support().collect(),
        };
        Ok(self
            .prepared
            .iter()
            .map(|q| match self.kind {
                GramKind::Ppk => compensated_sum(support.iter().filter(|&&(n, _)| q[n] > 0.0).map(|&(n, w)| w * q[n])),
                GramKind::Kme => support.iter().fold(0.0, |acc, &(n, w)| acc + w * q[n]),
            })
            .collect())
    }
}

/// Weights `v`, one per training posterior.
#[derive(Debug, Clone)]
pub struct GramModel {
    basis: Arc<GramBasis>,
    v: Vec<f64>,
}

impl GramModel {
    pub fn new(basis: Arc<GramBasis>, v: Vec<f64>) -> Result<Self> {
        if v.len() != basis.len() {
            return Err(Error::invalid(format!("{} weights for {} training posteriors", v.len(), basis.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite model weight".into()));
        }
        Ok(GramModel { basis, v })
    }

    pub fn basis(&self) -> &Arc<GramBasis> {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.v
    }

    pub fn kind(&self) -> GramKind {
        self.basis.kind
    }

    /// Probability from a precomputed kernel row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(dot(&self.v, row))
    }
}

/// The training objective: KLR whose feature rows are the Gram matrix.
pub fn gram_objective<P: Borrow<GridPosterior>>(basis: &GramBasis, data: &[(P, bool)]) -> Result<FeatureKlr> {
    let rows = data.iter().map(|(p, _)| basis.row(p.borrow())).collect::<Result<Vec<_>>>()?;
    FeatureKlr::new(rows, data.iter().map(|(_, c)| *c).collect())
}

pub fn gram_klr_train<P: Borrow<GridPosterior>>(
    data: &[(P, bool)],
    kind: GramKind,
    cfg: &TrainConfig,
    kernel: KernelConfig,
) -> Result<GramModel> {
    let posts: Vec<&GridPosterior> = data.iter().map(|(p, _)| p.borrow()).collect();
    let basis = Arc::new(GramBasis::new(kind, kernel, &posts)?);
    let obj = gram_objective(&basis, data)?;
    GramModel::new(basis.clone(), best_of_restarts(&obj, cfg)?)
}

/// Every restart kept as an ensemble member, all sharing one basis.
pub fn gram_train_ensemble<P: Borrow<GridPosterior>>(
    data: &[(P, bool)],
    kind: GramKind,
    cfg: &TrainConfig,
    kernel: KernelConfig,
) -> Result<Ensemble<GramModel>> {
    let posts: Vec<&GridPosterior> = data.iter().map(|(p, _)| p.borrow()).collect();
    let basis = Arc::new(GramBasis::new(kind, kernel, &posts)?);
    let ws = all_restarts(&gram_objective(&basis, data)?, cfg)?;
    Ensemble::new(ws.into_iter().map(|v| GramModel::new(basis.clone(), v)).collect::<Result<_>>()?)
}

/// Ensemble prediction computing the kernel row once; members must share a basis.
pub fn gram_ensemble_predict(ens: &Ensemble<GramModel>, post: &GridPosterior) -> Result<f64> {
    let basis = ens.members()[0].basis();
    if ens.members().iter().any(|m| !Arc::ptr_eq(m.basis(), basis)) {
        return crate::classifiers::ensemble_predict(ens, post);
    }
    let row = basis.row(post)?;
    let sum: f64 = ens.members().iter().map(|m| m.predict_row(&row)).sum();
    Ok(sum / ens.len() as f64)
}

pub fn gram_klr_predict(model: &GramModel, post: &GridPosterior) -> Result<f64> {
    Ok(model.predict_row(&model.basis.row(post)?))
}

impl Classifier<GridPosterior> for GramModel {
    fn predict_proba(&self, post: &GridPosterior) -> Result<f64> {
        gram_klr_predict(self, post)
    }
}
