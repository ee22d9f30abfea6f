//! Signal-space baseline: KLR on the (mean, std) summary of each series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ensemble::{Classifier, Ensemble};
use super::kernel::{gaussian_kernel, KernelConfig};
use super::optim::{all_restarts, best_of_restarts, dot, sigmoid, FeatureKlr, TrainConfig};

/// Per-dimension affine map of the training features onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub lo: [f64; 2],
    pub span: [f64; 2],
}

impl FeatureScaler {
    pub fn fit(features: &[[f64; 2]]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InsufficientData("no features to normalise".into()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for f in features {
            for d in 0..2 {
                if !f[d].is_finite() {
                    return Err(Error::Numerical("non-finite signal feature".into()));
                }
                lo[d] = lo[d].min(f[d]);
                hi[d] = hi[d].max(f[d]);
            }
        }
        let span = [hi[0] - lo[0], hi[1] - lo[1]];
        if span.iter().any(|s| *s <= 0.0) {
            return Err(Error::invalid("degenerate feature range in training batch"));
        }
        Ok(FeatureScaler { lo, span })
    }

    pub fn apply(&self, f: [f64; 2]) -> [f64; 2] {
        [(f[0] - self.lo[0]) / self.span[0], (f[1] - self.lo[1]) / self.span[1]]
    }
}

/// Gaussian-kernel KLR with the scaled training points as centres.
#[derive(Debug, Clone)]
pub struct BklrModel {
    scaler: FeatureScaler,
    centres: Vec<[f64; 2]>,
    rho: f64,
    w: Vec<f64>,
}

impl BklrModel {
    pub fn new(scaler: FeatureScaler, centres: Vec<[f64; 2]>, rho: f64, w: Vec<f64>) -> Result<Self> {
        KernelConfig::Rho(rho).validate()?;
        if centres.len() != w.len() {
            return Err(Error::invalid("one weight per centre required"));
        }
        Ok(BklrModel { scaler, centres, rho, w })
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn centres(&self) -> &[[f64; 2]] {
        &self.centres
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    fn features(&self, x: [f64; 2]) -> Vec<f64> {
        let u = self.scaler.apply(x);
        self.centres.iter().map(|c| gaussian_kernel(&u, c, self.rho)).collect()
    }
}

fn bklr_objective(features: &[[f64; 2]], labels: &[bool], rho: f64) -> Result<(FeatureScaler, Vec<[f64; 2]>, FeatureKlr)> {
    if features.len() != labels.len() {
        return Err(Error::invalid("features and labels differ in length"));
    }
    let scaler = FeatureScaler::fit(features)?;
    let centres: Vec<[f64; 2]> = features.iter().map(|f| scaler.apply(*f)).collect();
    let rows = centres.iter().map(|u| centres.iter().map(|c| gaussian_kernel(u, c, rho)).collect()).collect();
    let obj = FeatureKlr::new(rows, labels.to_vec())?;
    Ok((scaler, centres, obj))
}

pub fn bklr_train(features: &[[f64; 2]], labels: &[bool], cfg: &TrainConfig, kernel: KernelConfig) -> Result<BklrModel> {
    let rho = kernel.rho()?;
    let (scaler, centres, obj) = bklr_objective(features, labels, rho)?;
    let w = best_of_restarts(&obj, cfg)?;
    BklrModel::new(scaler, centres, rho, w)
}

pub fn bklr_train_ensemble(features: &[[f64; 2]], labels: &[bool], cfg: &TrainConfig, kernel: KernelConfig) -> Result<Ensemble<BklrModel>> {
    let rho = kernel.rho()?;
    let (scaler, centres, obj) = bklr_objective(features, labels, rho)?;
    let ws = all_restarts(&obj, cfg)?;
    Ensemble::new(ws.into_iter().map(|w| BklrModel::new(scaler, centres.clone(), rho, w)).collect::<Result<_>>()?)
}

pub fn bklr_predict(model: &BklrModel, x: [f64; 2]) -> f64 {
    sigmoid(dot(&model.w, &model.features(x)))
}

impl Classifier<[f64; 2]> for BklrModel {
    fn predict_proba(&self, x: &[f64; 2]) -> Result<f64> {
        Ok(bklr_predict(self, *x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_is_affine_and_monotone() {
        let s = FeatureScaler::fit(&[[1.0, 5.0], [3.0, 7.0], [2.0, 6.0]]).unwrap();
        assert_eq!(s.apply([1.0, 5.0]), [0.0, 0.0]);
        assert_eq!(s.apply([3.0, 7.0]), [1.0, 1.0]);
        assert!(s.apply([1.5, 0.0])[0] < s.apply([1.6, 0.0])[0]);
        assert!(FeatureScaler::fit(&[[1.0, 2.0], [1.0, 3.0]]).is_err());
    }

    #[test]
    fn learns_shifted_clusters() {
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for k in 0..20 {
            let j = (k as f64) * 0.01;
            feats.push([0.1 + j, 1.0 - j]);
            labels.push(true);
            feats.push([0.8 + j, 1.2 + j]);
            labels.push(false);
        }
        let cfg = TrainConfig { n_init: 2, ..Default::default() };
        let m = bklr_train(&feats, &labels, &cfg, KernelConfig::Rho(1.0)).unwrap();
        for (f, c) in feats.iter().zip(&labels) {
            assert_eq!(bklr_predict(&m, *f) >= 0.5, *c);
        }
        let zero = BklrModel::new(*m.scaler(), m.centres().to_vec(), 1.0, vec![0.0; 40]).unwrap();
        assert_eq!(bklr_predict(&zero, [0.3, 0.3]), 0.5);
    }
}
