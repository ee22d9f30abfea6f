//! Classification tasks: class prototypes, jitter and the generating system.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{SdwParams, WellFamily};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const JITTER_D: f64 = 0.1 / 3.0;
pub const JITTER_KAPPA: f64 = 0.05 / 3.0;
const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub class1: SdwParams,
    pub class0: SdwParams,
    pub jitter_d: f64,
    pub jitter_kappa: f64,
    /// System that generates the data; inference always uses the double well.
    pub generator: WellFamily,
}

impl TaskSpec {
    pub fn new(name: &str, class1: SdwParams, class0: SdwParams, generator: WellFamily) -> Self {
        TaskSpec {
            name: name.to_string(),
            class1,
            class0,
            jitter_d: JITTER_D,
            jitter_kappa: JITTER_KAPPA,
            generator,
        }
    }

    pub fn prototype(&self, label: bool) -> &SdwParams {
        if label {
            &self.class1
        } else {
            &self.class0
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.class1.validate()?;
        self.class0.validate()?;
        if !(self.jitter_d >= 0.0 && self.jitter_kappa >= 0.0) {
            return Err(Error::invalid("jitter standard deviations must be >= 0"));
        }
        Ok(())
    }
}

fn sdw(d: f64, kappa: f64, a: f64) -> SdwParams {
    SdwParams { d, kappa, a }
}

/// Task 1 to 3 and the multi-well variant of Task 1.
pub fn builtin_tasks() -> BTreeMap<String, TaskSpec> {
    let t1 = TaskSpec::new("task1", sdw(1.0, 1.0, -0.1), sdw(1.3, 1.5, 0.1), WellFamily::DoubleWell);
    let t1e = TaskSpec { name: "task1e".into(), generator: WellFamily::MultiWell, ..t1.clone() };
    let t2 = TaskSpec::new("task2", sdw(1.0, 1.5, 0.0), sdw(1.3, 1.5, 0.0), WellFamily::DoubleWell);
    let t3 = TaskSpec::new("task3", sdw(1.0, 1.5, 0.0), sdw(1.2, 1.5, 0.0), WellFamily::DoubleWell);
    [t1, t1e, t2, t3].into_iter().map(|t| (t.name.clone(), t)).collect()
}

pub fn task_by_name(name: &str) -> Result<TaskSpec> {
    builtin_tasks().remove(name).ok_or_else(|| Error::UnknownTask(name.to_string()))
}

/// Prototype of class `label` with Gaussian jitter on `d` and `kappa`.
pub fn sample_class_params(task: &TaskSpec, label: bool, seed: u64) -> Result<SdwParams> {
    let proto = task.prototype(label);
    let mut rng = rng_from_seed(seed);
    let mut draw = |mean: f64, std: f64| -> Result<f64> {
        if std == 0.0 {
            return Ok(mean);
        }
        let n = Normal::new(mean, std).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(n.sample(&mut rng))
    };
    let d = draw(proto.d, task.jitter_d)?;
    let kappa = draw(proto.kappa, task.jitter_kappa)?;
    let p = SdwParams { d, kappa, a: proto.a };
    p.validate()?;
    Ok(p)
}

/// Rejection sample of `N(mean, variance)` restricted to `[lo, hi]`.
pub fn truncated_gaussian_sample(mean: f64, variance: f64, lo: f64, hi: f64, seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    truncated_gaussian_with(mean, variance, lo, hi, &mut rng)
}

pub fn truncated_gaussian_with<R: Rng>(mean: f64, variance: f64, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty interval [{lo}, {hi}]")));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance must be > 0, got {variance}")));
    }
    let n = Normal::new(mean, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    for _ in 0..=MAX_REJECTIONS {
        let x = n.sample(rng);
        if (lo..=hi).contains(&x) {
            return Ok(x);
        }
    }
    Err(Error::Numerical(format!("more than {MAX_REJECTIONS} rejections sampling N({mean}, {variance}) on [{lo}, {hi}]")))
}
