//! Point kernel logistic regression on the parameter grid and its
//! distributional extension over grid posteriors.

use std::borrow::Borrow;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::inference::{map_estimate, GridPosterior, ParamGrid, ParamVector};

use super::ensemble::{Classifier, Ensemble};
use super::kernel::{GridFeatures, KernelConfig};
use super::optim::{all_restarts, best_of_restarts, check_labels, clamped_neg_ln, dot, sigmoid, FeatureKlr, Objective, TrainConfig};

/// Weights over Gaussian features centred on the grid points.
#[derive(Debug, Clone)]
pub struct LimsModel {
    features: Arc<GridFeatures>,
    w: Vec<f64>,
    field: Vec<f64>,
    prob: Vec<f64>,
}

impl LimsModel {
    pub fn new(features: Arc<GridFeatures>, w: Vec<f64>) -> Result<Self> {
        if w.len() != features.len() {
            return Err(Error::invalid(format!("{} weights for {} feature points", w.len(), features.len())));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite model weight".into()));
        }
        let field = features.field_exact(&w);
        let prob = field.iter().map(|&a| sigmoid(a)).collect();
        Ok(LimsModel { features, w, field, prob })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn features(&self) -> &Arc<GridFeatures> {
        &self.features
    }

    pub fn grid(&self) -> &Arc<ParamGrid> {
        self.features.grid()
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig::Rho(self.features.rho())
    }

    pub fn feature_points(&self) -> impl Iterator<Item = ParamVector> + '_ {
        self.grid().points()
    }

    /// `w . Phi(theta_n)` at every grid point.
    pub fn field(&self) -> &[f64] {
        &self.field
    }

    fn check_grid(&self, post: &GridPosterior) -> Result<()> {
        if Arc::ptr_eq(post.grid(), self.grid()) || post.grid() == self.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch("posterior grid differs from the model's feature grid".into()))
        }
    }
}

pub fn feature_map(theta: &ParamVector, model: &LimsModel) -> Result<Vec<f64>> {
    model.features.feature_map(theta.as_slice())
}

/// `p(c=1 | theta)`.
pub fn klr_predict(model: &LimsModel, theta: &ParamVector) -> Result<f64> {
    Ok(sigmoid(dot(&model.w, &feature_map(theta, model)?)))
}

/// `sum_n pi_n p(c=1 | theta_n)`.
pub fn lims_predict(model: &LimsModel, post: &GridPosterior) -> Result<f64> {
    model.check_grid(post)?;
    Ok(post.support().fold(0.0, |acc, (n, p)| acc + p * model.prob[n]))
}

/// Trains point KLR on labelled parameter vectors. Returns the best restart.
pub fn klr_train<T: Borrow<ParamVector>>(
    grid: Arc<ParamGrid>,
    data: &[(T, bool)],
    cfg: &TrainConfig,
    kernel: KernelConfig,
) -> Result<LimsModel> {
    let features = Arc::new(GridFeatures::new(grid, kernel.rho()?)?);
    klr_train_with(features, data, cfg)
}

pub fn klr_train_with<T: Borrow<ParamVector>>(
    features: Arc<GridFeatures>,
    data: &[(T, bool)],
    cfg: &TrainConfig,
) -> Result<LimsModel> {
    let obj = point_objective(&features, data)?;
    let w = best_of_restarts(&obj, cfg)?;
    LimsModel::new(features, w)
}

pub(crate) fn point_objective<T: Borrow<ParamVector>>(features: &GridFeatures, data: &[(T, bool)]) -> Result<FeatureKlr> {
    let rows = data.iter().map(|(t, _)| features.feature_map(t.borrow().as_slice())).collect::<Result<Vec<_>>>()?;
    FeatureKlr::new(rows, data.iter().map(|(_, c)| *c).collect())
}

/// Approximate cross-entropy over posteriors, with the gradient in weight space.
pub struct LimsObjective<'a> {
    features: &'a GridFeatures,
    posts: Vec<(Vec<usize>, Vec<f64>)>,
    labels: Vec<bool>,
}

impl<'a> LimsObjective<'a> {
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
        Ok(LimsObjective { features, posts, labels })
    }

    fn loss_from_field(&self, field: &[f64], dfield: Option<&mut [f64]>) -> f64 {
        let z: Vec<f64> = field.iter().map(|&a| sigmoid(a)).collect();
        let zc: Vec<f64> = field.iter().map(|&a| sigmoid(-a)).collect();
        let mut loss = 0.0;
        let mut dfield = dfield;
        if let Some(d) = dfield.as_deref_mut() {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        for ((idx, pi), &c) in self.posts.iter().zip(&self.labels) {
            let p_c = if c { &z } else { &zc };
            let s = idx.iter().zip(pi).fold(0.0, |acc, (&n, &p)| acc + p * p_c[n]);
            loss += clamped_neg_ln(s);
            if let Some(d) = dfield.as_deref_mut() {
                // Z1_n (z_n - 1) for class 1, Z0_n z_n for class 0
                let s = s.max(f64::MIN_POSITIVE);
                let sign = if c { -1.0 } else { 1.0 };
                for (&n, &p) in idx.iter().zip(pi) {
                    d[n] += sign * p * z[n] * zc[n] / s;
                }
            }
        }
        loss
    }
}

impl Objective for LimsObjective<'_> {
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

/// `-sum_k ln sum_n pi_k^n p(c_k | theta_n)` under the model's weights.
pub fn lims_cross_entropy<P: Borrow<GridPosterior>>(model: &LimsModel, data: &[(P, bool)]) -> Result<f64> {
    let obj = LimsObjective::new(&model.features, data)?;
    Ok(obj.loss_from_field(&model.field, None))
}

/// Gradient of [`lims_cross_entropy`] with respect to the weights.
pub fn lims_gradient<P: Borrow<GridPosterior>>(model: &LimsModel, data: &[(P, bool)]) -> Result<Vec<f64>> {
    let obj = LimsObjective::new(&model.features, data)?;
    let mut g = vec![0.0; model.w.len()];
    obj.loss_grad(&model.w, &mut g);
    Ok(g)
}

pub fn lims_train<P: Borrow<GridPosterior>>(data: &[(P, bool)], cfg: &TrainConfig, kernel: KernelConfig) -> Result<LimsModel> {
    let grid = data
        .first()
        .ok_or_else(|| Error::InsufficientData("no training examples".into()))?
        .0
        .borrow()
        .grid()
        .clone();
    let features = Arc::new(GridFeatures::new(grid, kernel.rho()?)?);
    lims_train_with(features, data, cfg)
}

pub fn lims_train_with<P: Borrow<GridPosterior>>(features: Arc<GridFeatures>, data: &[(P, bool)], cfg: &TrainConfig) -> Result<LimsModel> {
    let w = best_of_restarts(&LimsObjective::new(&features, data)?, cfg)?;
    LimsModel::new(features, w)
}

/// Every restart of [`lims_train_with`] kept as an ensemble member.
pub fn lims_train_ensemble<P: Borrow<GridPosterior>>(
    features: Arc<GridFeatures>,
    data: &[(P, bool)],
    cfg: &TrainConfig,
) -> Result<Ensemble<LimsModel>> {
    let ws = all_restarts(&LimsObjective::new(&features, data)?, cfg)?;
    Ensemble::new(ws.into_iter().map(|w| LimsModel::new(features.clone(), w)).collect::<Result<_>>()?)
}

impl Classifier<GridPosterior> for LimsModel {
    fn predict_proba(&self, post: &GridPosterior) -> Result<f64> {
        lims_predict(self, post)
    }
}

impl Classifier<ParamVector> for LimsModel {
    fn predict_proba(&self, theta: &ParamVector) -> Result<f64> {
        klr_predict(self, theta)
    }
}

/// Point KLR applied to the MAP grid point of each posterior.
#[derive(Debug, Clone)]
pub struct MapClassifier {
    model: LimsModel,
}

impl MapClassifier {
    pub fn new(model: LimsModel) -> Self {
        MapClassifier { model }
    }

    pub fn model(&self) -> &LimsModel {
        &self.model
    }
}

pub fn map_classifier_train<P: Borrow<GridPosterior>>(data: &[(P, bool)], cfg: &TrainConfig, kernel: KernelConfig) -> Result<MapClassifier> {
    let grid = data
        .first()
        .ok_or_else(|| Error::InsufficientData("no training examples".into()))?
        .0
        .borrow()
        .grid()
        .clone();
    let features = Arc::new(GridFeatures::new(grid, kernel.rho()?)?);
    map_classifier_train_with(features, data, cfg)
}

pub fn map_classifier_train_with<P: Borrow<GridPosterior>>(
    features: Arc<GridFeatures>,
    data: &[(P, bool)],
    cfg: &TrainConfig,
) -> Result<MapClassifier> {
    let points: Vec<(ParamVector, bool)> = data.iter().map(|(p, c)| (map_estimate(p.borrow()), *c)).collect();
    Ok(MapClassifier { model: klr_train_with(features, &points, cfg)? })
}

pub fn map_train_ensemble<P: Borrow<GridPosterior>>(
    features: Arc<GridFeatures>,
    data: &[(P, bool)],
    cfg: &TrainConfig,
) -> Result<Ensemble<MapClassifier>> {
    let points: Vec<(ParamVector, bool)> = data.iter().map(|(p, c)| (map_estimate(p.borrow()), *c)).collect();
    let ws = all_restarts(&point_objective(&features, &points)?, cfg)?;
    Ensemble::new(
        ws.into_iter()
            .map(|w| LimsModel::new(features.clone(), w).map(MapClassifier::new))
            .collect::<Result<_>>()?,
    )
}

pub fn map_classifier_predict(model: &MapClassifier, post: &GridPosterior) -> Result<f64> {
    model.model.check_grid(post)?;
    klr_predict(&model.model, &map_estimate(post))
}

impl Classifier<GridPosterior> for MapClassifier {
    fn predict_proba(&self, post: &GridPosterior) -> Result<f64> {
        map_classifier_predict(self, post)
    }
}
