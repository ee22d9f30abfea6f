//! Gradient descent with random restarts.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Probabilities are clamped to this margin inside logarithms.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub step: f64,
    pub iters: usize,
    pub n_init: usize,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { step: 0.1, iters: 500, n_init: 15, init_seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("step must be > 0, got {}", self.step)));
        }
        if self.iters == 0 {
            return Err(Error::invalid("iters must be >= 1"));
        }
        if self.n_init == 0 {
            return Err(Error::invalid("n_init must be >= 1"));
        }
        Ok(())
    }

    /// Seed of the initial weights for restart `r`. Restart 0 uses `init_seed` itself.
    pub fn restart_seed(&self, r: usize) -> u64 {
        if r == 0 {
            self.init_seed
        } else {
            derive_seed(self.init_seed, &[stream::INIT, r as u64])
        }
    }

    /// Single-restart config that reproduces restart `r` of `self`.
    pub fn member(&self, r: usize) -> TrainConfig {
        TrainConfig { n_init: 1, init_seed: self.restart_seed(r), ..*self }
    }
}

/// A differentiable training loss.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Loss at `w`; writes the gradient into `grad`.
    fn loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64;

    fn loss(&self, w: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.loss_grad(w, &mut g)
    }
}

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn clamped_neg_ln(p: f64) -> f64 {
    -p.clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
}

/// `N(0, 1)` initial weights.
pub fn init_weights(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Fixed-step gradient descent. Returns the final weights and their loss.
pub fn gradient_descent<O: Objective + ?Sized>(obj: &O, mut w: Vec<f64>, step: f64, iters: usize) -> Result<(Vec<f64>, f64)> {
    let mut g = vec![0.0; w.len()];
    for it in 0..iters {
        let loss = obj.loss_grad(&w, &mut g);
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite loss at iteration {it}")));
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= step * gi;
        }
    }
    let loss = obj.loss(&w);
    if !loss.is_finite() {
        return Err(Error::Numerical("non-finite final loss".into()));
    }
    Ok((w, loss))
}

/// Runs every restart of `cfg` and returns `(weights, final loss)` per restart in order.
pub fn run_restarts<O: Objective + ?Sized>(obj: &O, cfg: &TrainConfig) -> Result<Vec<Result<(Vec<f64>, f64)>>> {
    cfg.validate()?;
    Ok((0..cfg.n_init)
        .into_par_iter()
        .map(|r| gradient_descent(obj, init_weights(obj.dim(), cfg.restart_seed(r)), cfg.step, cfg.iters))
        .collect())
}

/// Weights of the restart with the lowest final loss (earliest wins ties).
pub fn best_of_restarts<O: Objective + ?Sized>(obj: &O, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut last_err = None;
    for res in run_restarts(obj, cfg)? {
        match res {
            Ok((w, l)) => {
                if best.as_ref().is_none_or(|(_, b)| l < *b) {
                    best = Some((w, l));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.map(|(w, _)| w).ok_or_else(|| last_err.unwrap_or_else(|| Error::Numerical("no restart finished".into())))
}

/// Weights of every successful restart, in restart order.
pub fn all_restarts<O: Objective + ?Sized>(obj: &O, cfg: &TrainConfig) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut last_err = None;
    for res in run_restarts(obj, cfg)? {
        match res {
            Ok((w, _)) => out.push(w),
            Err(e) => last_err = Some(e),
        }
    }
    if out.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Numerical("no restart finished".into())));
    }
    Ok(out)
}

/// Logistic regression on explicit feature rows, `p(c=1|x) = sigmoid(w . phi(x))`.
#[derive(Debug, Clone)]
pub struct FeatureKlr {
    dim: usize,
    rows: Vec<f64>,
    labels: Vec<bool>,
}

impl FeatureKlr {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid("feature rows and labels differ in length"));
        }
        check_labels(&labels)?;
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("feature rows differ in length"));
        }
        Ok(FeatureKlr { dim, rows: rows.concat(), labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl Objective for FeatureKlr {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (row, &c) in self.rows.chunks_exact(self.dim).zip(&self.labels) {
            let a = dot(w, row);
            let z = sigmoid(a);
            loss += clamped_neg_ln(if c { z } else { sigmoid(-a) });
            let r = if c { z - 1.0 } else { z };
            for (g, x) in grad.iter_mut().zip(row) {
                *g += r * x;
            }
        }
        loss
    }
}

pub(crate) fn check_labels(labels: &[bool]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("no training examples".into()));
    }
    if labels.iter().all(|&c| c) || labels.iter().all(|&c| !c) {
        return Err(Error::InsufficientData("training data must contain both classes".into()));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}
