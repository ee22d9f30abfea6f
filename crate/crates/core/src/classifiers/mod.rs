//! Classifiers over parameter vectors, grid posteriors and signal features.

pub mod baseline;
pub mod ensemble;
pub mod gram;
pub mod kernel;
pub mod kme;
pub mod lims;
pub mod optim;
pub mod persist;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baseline::{bklr_predict, bklr_train, bklr_train_ensemble, BklrModel, FeatureScaler};
pub use ensemble::{ensemble_predict, ensemble_train, Classifier, Ensemble};
pub use gram::{gram_ensemble_predict, gram_klr_predict, gram_objective, gram_klr_train, gram_train_ensemble, GramBasis, GramKind, GramModel};
pub use kernel::{gaussian_kernel, kme_kernel, ppk_kernel, GridFeatures, KernelConfig};
pub use kme::{kme_predict, kme_train, kme_train_ensemble, KmeModel, KmeObjective};
pub use lims::{
    feature_map, klr_predict, klr_train, klr_train_with, lims_cross_entropy, lims_gradient, lims_predict, lims_train, lims_train_ensemble,
    lims_train_with, map_classifier_predict, map_classifier_train, map_classifier_train_with, map_train_ensemble, LimsModel, LimsObjective, MapClassifier,
};
pub use optim::{sigmoid, FeatureKlr, Objective, TrainConfig};
pub use persist::{ModelDocument, WeightsOn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lims,
    Ppk,
    Kme,
    Bklr,
    Map,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] =
        [ClassifierKind::Lims, ClassifierKind::Ppk, ClassifierKind::Kme, ClassifierKind::Bklr, ClassifierKind::Map];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Lims => "lims",
            ClassifierKind::Ppk => "ppk",
            ClassifierKind::Kme => "kme",
            ClassifierKind::Bklr => "bklr",
            ClassifierKind::Map => "map",
        }
    }

    /// Wraps a hyperparameter value in the kernel parameter this kind uses.
    pub fn kernel(&self, value: f64) -> KernelConfig {
        match self {
            ClassifierKind::Ppk => KernelConfig::Alpha(value),
            _ => KernelConfig::Rho(value),
        }
    }

    /// Headline hyperparameter.
    pub fn default_hyperparam(&self) -> f64 {
        match self {
            ClassifierKind::Lims | ClassifierKind::Map => 0.05,
            ClassifierKind::Ppk => 2.0,
            ClassifierKind::Kme | ClassifierKind::Bklr => 1.0,
        }
    }

    /// Values swept over in hyperparameter studies.
    pub fn sweep_values(&self) -> Vec<f64> {
        match self {
            ClassifierKind::Ppk => vec![1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            _ => vec![0.0001, 0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0],
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown classifier '{s}'")))
    }
}
