use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::{EquilibriumSampler, SdwParams};
use crate::error::{Error, Result};
use crate::observation::TimeSeries;
use crate::rng::{derive_seed, stream};

use super::likelihood::{filter_loglik, FilterNoise, InitialState, NoiseModel, ParticleFilterConfig};
use super::posterior::{posterior_from_logliks, GridPosterior, Prior};
use super::grid::ParamGrid;

/// Grid posteriors for well systems with particle-filter likelihoods.
///
/// All grid points of one series share a noise table whose seed is derived
/// from the master seed and the series key, so the posterior does not depend
/// on how the work is scheduled across threads.
#[derive(Debug)]
pub struct SdwPosteriorEngine {
    grid: Arc<ParamGrid>,
    params: Vec<SdwParams>,
    samplers: Vec<EquilibriumSampler>,
    finest_substep: f64,
    filter: ParticleFilterConfig,
    evaluations: AtomicU64,
}

impl SdwPosteriorEngine {
    pub fn new(grid: Arc<ParamGrid>, filter: ParticleFilterConfig) -> Result<Self> {
        filter.validate()?;
        if grid.dims() != 3 {
            return Err(Error::GridMismatch(format!(
                "well-system grids have 3 axes (d, kappa, a), got {}",
                grid.dims()
            )));
        }
        let params = grid
            .points()
            .map(|p| SdwParams::from_slice(p.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        let samplers = match filter.init {
            InitialState::Equilibrium => params
                .par_iter()
                .map(|p| EquilibriumSampler::new(p, filter.family))
                .collect::<Result<Vec<_>>>()?,
            InitialState::Fixed(_) => Vec::new(),
        };
        let finest_substep = params
            .iter()
            .map(|p| filter.substep(p))
            .fold(f64::INFINITY, f64::min);
        Ok(SdwPosteriorEngine { grid, params, samplers, finest_substep, filter, evaluations: AtomicU64::new(0) })
    }

    pub fn grid(&self) -> &Arc<ParamGrid> {
        &self.grid
    }

    pub fn filter(&self) -> &ParticleFilterConfig {
        &self.filter
    }

    /// Number of likelihood evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Log-likelihood of `ts` at every grid point. Runs on the current rayon pool.
    pub fn logliks(&self, ts: &TimeSeries, series_key: u64, master_seed: u64) -> Result<Vec<f64>> {
        let noise = NoiseModel::new(ts.sigma)?;
        let seed = derive_seed(master_seed, &[stream::LIKELIHOOD, series_key]);
        let table = FilterNoise::new(ts, &self.filter, self.finest_substep, seed)?;
        let out = self
            .params
            .par_iter()
            .enumerate()
            .map(|(idx, theta)| {
                let sampler = self.samplers.get(idx);
                filter_loglik(theta, sampler, ts, &noise, &self.filter, &table)
            })
            .collect::<Result<Vec<_>>>()?;
        self.evaluations.fetch_add(out.len() as u64, Ordering::Relaxed);
        Ok(out)
    }

    pub fn infer(&self, ts: &TimeSeries, series_key: u64, master_seed: u64) -> Result<GridPosterior> {
        let ll = self.logliks(ts, series_key, master_seed)?;
        posterior_from_logliks(self.grid.clone(), &ll, &Prior::Uniform)
    }
}
