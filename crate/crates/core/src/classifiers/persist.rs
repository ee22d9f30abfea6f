//! Versioned JSON documents for trained ensembles.

use std::borrow::Borrow;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{GridPosterior, ParamGrid};

use super::baseline::{BklrModel, FeatureScaler};
use super::ensemble::Ensemble;
use super::gram::{GramBasis, GramKind, GramModel};
use super::kernel::{GridFeatures, KernelConfig};
use super::kme::KmeModel;
use super::lims::{LimsModel, MapClassifier};
use super::ClassifierKind;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// What the weight vectors index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsOn {
    Grid,
    Examples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub kind: ClassifierKind,
    pub kernel: KernelConfig,
    /// Fingerprint of the parameter grid, absent for the signal-space baseline.
    pub grid_hash: Option<String>,
    pub weights_on: WeightsOn,
    /// One weight vector per ensemble member.
    pub members: Vec<Vec<f64>>,
    /// Identifiers of the training posteriors a Gram model refers to.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<FeatureScaler>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub centres: Vec<[f64; 2]>,
}

impl ModelDocument {
    fn base(kind: ClassifierKind, kernel: KernelConfig, grid_hash: Option<String>, members: Vec<Vec<f64>>) -> Self {
        let weights_on = if matches!(kind, ClassifierKind::Ppk | ClassifierKind::Bklr) { WeightsOn::Examples } else { WeightsOn::Grid };
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            kernel,
            grid_hash,
            weights_on,
            members,
            training_ids: Vec::new(),
            scaler: None,
            centres: Vec::new(),
        }
    }

    pub fn from_lims(ens: &Ensemble<LimsModel>) -> Self {
        let first = &ens.members()[0];
        Self::base(
            ClassifierKind::Lims,
            first.kernel(),
            Some(first.grid().fingerprint()),
            ens.members().iter().map(|m| m.weights().to_vec()).collect(),
        )
    }

    pub fn from_map(ens: &Ensemble<MapClassifier>) -> Self {
        let first = ens.members()[0].model();
        Self::base(
            ClassifierKind::Map,
            first.kernel(),
            Some(first.grid().fingerprint()),
            ens.members().iter().map(|m| m.model().weights().to_vec()).collect(),
        )
    }

    pub fn from_gram(ens: &Ensemble<GramModel>, training_ids: Vec<String>) -> Self {
        let basis = ens.members()[0].basis();
        let kind = match basis.kind() {
            GramKind::Ppk => ClassifierKind::Ppk,
            GramKind::Kme => ClassifierKind::Kme,
        };
        let mut doc = Self::base(
            kind,
            basis.kernel(),
            Some(basis.grid().fingerprint()),
            ens.members().iter().map(|m| m.weights().to_vec()).collect(),
        );
        doc.weights_on = WeightsOn::Examples;
        doc.training_ids = training_ids;
        doc
    }

    pub fn from_kme(ens: &Ensemble<KmeModel>) -> Self {
        let first = &ens.members()[0];
        Self::base(
            ClassifierKind::Kme,
            first.kernel(),
            Some(first.grid().fingerprint()),
            ens.members().iter().map(|m| m.weights().to_vec()).collect(),
        )
    }

    pub fn to_kme(&self, grid: Arc<ParamGrid>) -> Result<Ensemble<KmeModel>> {
        self.expect_kind(&[ClassifierKind::Kme])?;
        if self.weights_on != WeightsOn::Grid {
            return Err(Error::invalid("document holds a Gram-form embedding model"));
        }
        self.check_grid(&grid)?;
        let features = Arc::new(GridFeatures::new(grid, self.kernel.rho()?)?);
        Ensemble::new(self.members.iter().map(|w| KmeModel::new(features.clone(), w.clone())).collect::<Result<_>>()?)
    }

    pub fn from_bklr(ens: &Ensemble<BklrModel>) -> Self {
        let first = &ens.members()[0];
        let mut doc = Self::base(
            ClassifierKind::Bklr,
            KernelConfig::Rho(first.rho()),
            None,
            ens.members().iter().map(|m| m.weights().to_vec()).collect(),
        );
        doc.scaler = Some(*first.scaler());
        doc.centres = first.centres().to_vec();
        doc
    }

    fn expect_kind(&self, kinds: &[ClassifierKind]) -> Result<()> {
        if kinds.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::invalid(format!("model document holds a {} model", self.kind)))
        }
    }

    fn check_grid(&self, grid: &ParamGrid) -> Result<()> {
        match &self.grid_hash {
            Some(h) if *h == grid.fingerprint() => Ok(()),
            Some(h) => Err(Error::GridMismatch(format!("model grid {h} differs from {}", grid.fingerprint()))),
            None => Err(Error::GridMismatch("model document has no grid".into())),
        }
    }

    fn lims_members(&self, grid: Arc<ParamGrid>) -> Result<Vec<LimsModel>> {
        self.check_grid(&grid)?;
        let features = Arc::new(GridFeatures::new(grid, self.kernel.rho()?)?);
        self.members.iter().map(|w| LimsModel::new(features.clone(), w.clone())).collect()
    }

    pub fn to_lims(&self, grid: Arc<ParamGrid>) -> Result<Ensemble<LimsModel>> {
        self.expect_kind(&[ClassifierKind::Lims])?;
        Ensemble::new(self.lims_members(grid)?)
    }

    pub fn to_map(&self, grid: Arc<ParamGrid>) -> Result<Ensemble<MapClassifier>> {
        self.expect_kind(&[ClassifierKind::Map])?;
        Ensemble::new(self.lims_members(grid)?.into_iter().map(MapClassifier::new).collect())
    }

    /// Rebuilds a Gram ensemble from the training posteriors, in `training_ids` order.
    pub fn to_gram<P: Borrow<GridPosterior>>(&self, training: &[P]) -> Result<Ensemble<GramModel>> {
        self.expect_kind(&[ClassifierKind::Ppk, ClassifierKind::Kme])?;
        if self.weights_on != WeightsOn::Examples {
            return Err(Error::invalid("document holds grid weights, not Gram weights"));
        }
        let kind = if self.kind == ClassifierKind::Ppk { GramKind::Ppk } else { GramKind::Kme };
        let first = training.first().ok_or_else(|| Error::InsufficientData("no training posteriors".into()))?;
        self.check_grid(first.borrow().grid())?;
        let basis = Arc::new(GramBasis::new(kind, self.kernel, training)?);
        Ensemble::new(self.members.iter().map(|v| GramModel::new(basis.clone(), v.clone())).collect::<Result<_>>()?)
    }

    pub fn to_bklr(&self) -> Result<Ensemble<BklrModel>> {
        self.expect_kind(&[ClassifierKind::Bklr])?;
        let scaler = self.scaler.ok_or_else(|| Error::invalid("bklr document lacks a feature scaler"))?;
        let rho = self.kernel.rho()?;
        Ensemble::new(
            self.members
                .iter()
                .map(|w| BklrModel::new(scaler, self.centres.clone(), rho, w.clone()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDocument = serde_json::from_str(&text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported model format version {}", doc.format_version),
            });
        }
        Ok(doc)
    }
}
