//! Observation likelihoods for deterministic and stochastic models.
//!
//! For an ODE the likelihood of a series is a product of Gaussian densities
//! around the simulated path. For an SDE the path is latent and the marginal
//! likelihood is estimated with a bootstrap particle filter.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    double_well_drift, multi_well_drift, noise_scale, pulse_drift, simulate_ode, EquilibriumSampler, PulseParams, SdwParams,
    Trajectory, WellFamily,
};
use crate::error::{Error, Result};
use crate::observation::TimeSeries;
use crate::rng::rng_from_seed;

use super::grid::ParamVector;

/// Largest drift displacement allowed in one filter substep.
const MAX_DRIFT_STEP: f64 = 1.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Known observation noise; the measurement variance is `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("observation noise sigma must be > 0, got {sigma}")));
        }
        Ok(NoiseModel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn log_density(&self, y: f64, mean: f64) -> f64 {
        let r = (y - mean) / self.sigma;
        -0.5 * r * r - self.sigma.ln() - 0.5 * LN_2PI
    }
}

/// A deterministic model that can produce a path for a parameter vector.
pub trait OdeModel {
    fn trajectory(&self, theta: &[f64], t_end: f64) -> Result<Trajectory>;
}

/// The pulse-driven linear system, `theta = (f, t_p)`.
#[derive(Debug, Clone, Copy)]
pub struct PulseOdeModel {
    pub x0: f64,
    pub dt: f64,
}

impl Default for PulseOdeModel {
    fn default() -> Self {
        PulseOdeModel { x0: 0.0, dt: 0.01 }
    }
}

impl OdeModel for PulseOdeModel {
    fn trajectory(&self, theta: &[f64], t_end: f64) -> Result<Trajectory> {
        let p = PulseParams::from_slice(theta)?;
        // one extra step so that t_end is always covered
        simulate_ode(|x, t| pulse_drift(x, t, &p), self.x0, self.dt, t_end + self.dt)
    }
}

/// `sum_i log N(y_i; x_theta(t_i), sigma^2)`.
pub fn ode_loglik<M: OdeModel>(theta: &ParamVector, ts: &TimeSeries, noise: &NoiseModel, model: &M) -> Result<f64> {
    let t_end = ts.times().last().copied().unwrap_or(0.0);
    let traj = model.trajectory(theta.as_slice(), t_end)?;
    path_loglik(&traj, ts, noise)
}

/// Gaussian log-likelihood of `ts` around a fixed path.
pub fn path_loglik(traj: &Trajectory, ts: &TimeSeries, noise: &NoiseModel) -> Result<f64> {
    ts.times()
        .iter()
        .zip(&ts.values)
        .map(|(&t, &y)| {
            traj.value_at(t)
                .map(|x| noise.log_density(y, x))
                .ok_or_else(|| Error::invalid(format!("observation time {t} outside simulated span")))
        })
        .sum()
}

/// How particles are initialised at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Draw from the candidate model's stationary density.
    #[default]
    Equilibrium,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleFilterConfig {
    pub n_particles: usize,
    /// Upper bound on the integration substep between observations.
    pub max_substep: f64,
    /// Further bound `h * lambda <= stiffness_step`, where `lambda` is the
    /// largest curvature of the potential at the wells. Keeps the
    /// discretised within-well variance close to the continuous one.
    pub stiffness_step: f64,
    /// Dynamics assumed by the inferential model.
    pub family: WellFamily,
    pub init: InitialState,
}

impl Default for ParticleFilterConfig {
    fn default() -> Self {
        ParticleFilterConfig {
            n_particles: 512,
            max_substep: 0.05,
            stiffness_step: 0.25,
            family: WellFamily::DoubleWell,
            init: InitialState::Equilibrium,
        }
    }
}

impl ParticleFilterConfig {
    pub fn with_particles(n_particles: usize) -> Self {
        ParticleFilterConfig { n_particles, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::invalid(format!("need at least 2 particles, got {}", self.n_particles)));
        }
        if !(self.max_substep > 0.0 && self.max_substep.is_finite()) {
            return Err(Error::invalid(format!("substep must be > 0, got {}", self.max_substep)));
        }
        if !(self.stiffness_step > 0.0) {
            return Err(Error::invalid(format!("stiffness step must be > 0, got {}", self.stiffness_step)));
        }
        Ok(())
    }

    /// Substep length used for `theta`.
    pub fn substep(&self, theta: &SdwParams) -> f64 {
        let curvature = well_curvature(theta, self.family);
        self.max_substep.min(self.stiffness_step / curvature)
    }

    fn substeps(&self, gap: f64, h: f64) -> usize {
        if gap > 0.0 {
            (gap / h - 1e-9).ceil().max(1.0) as usize
        } else {
            0
        }
    }
}

/// Largest second derivative of the potential at the well bottoms.
pub fn well_curvature(theta: &SdwParams, family: WellFamily) -> f64 {
    let base = 8.0 * theta.d * (theta.d + theta.a.abs());
    match family {
        WellFamily::DoubleWell => base,
        WellFamily::MultiWell => base + 8.0 * std::f64::consts::PI.powi(2),
    }
}

/// Random numbers consumed by particle-filter runs on one series.
///
/// The table holds, for the gap before each observation, enough standard
/// normals for the finest substep any candidate model will use; a model
/// with a coarser substep reads a prefix of each block. One table drives the
/// filter for every grid point of a series, so likelihood differences
/// between neighbouring grid points are not swamped by independent
/// Monte-Carlo noise (common random numbers).
#[derive(Debug, Clone)]
pub struct FilterNoise {
    n_particles: usize,
    gaps: Vec<f64>,
    /// Start offset and substep capacity of each block.
    blocks: Vec<(usize, usize)>,
    normals: Vec<f64>,
    init_uniforms: Vec<f64>,
    offsets: Vec<f64>,
}

impl FilterNoise {
    /// `finest_substep` is the smallest substep the table must support.
    pub fn new(ts: &TimeSeries, cfg: &ParticleFilterConfig, finest_substep: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if !(finest_substep > 0.0) {
            return Err(Error::invalid("finest substep must be > 0"));
        }
        let n = cfg.n_particles;
        let mut gaps = Vec::with_capacity(ts.len());
        let mut blocks = Vec::with_capacity(ts.len());
        let mut t_prev = 0.0;
        let mut start = 0;
        for &t in ts.times() {
            let gap = t - t_prev;
            if gap < 0.0 {
                return Err(Error::invalid(format!("observation time {t} precedes the window start")));
            }
            let cap = cfg.substeps(gap, finest_substep);
            gaps.push(gap);
            blocks.push((start, cap));
            start += cap * n;
            t_prev = t;
        }
        let mut rng = rng_from_seed(seed);
        let init_uniforms = (0..n).map(|_| rng.random::<f64>()).collect();
        let offsets = (0..ts.len()).map(|_| rng.random::<f64>()).collect();
        let normals = (0..start).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(FilterNoise { n_particles: n, gaps, blocks, normals, init_uniforms, offsets })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }
}

/// Bootstrap particle-filter estimate of `log p(y_1..y_L | theta)`.
///
/// Particles start at `t = 0` and move by Euler–Maruyama substeps whose
/// drift displacement is capped at one state unit, so a particle thrown far
/// out onto the cubic walls cannot overshoot and diverge. Each observation
/// reweights the particles by the Gaussian measurement density and triggers
/// systematic resampling.
pub fn sde_marginal_loglik(
    theta: &SdwParams,
    ts: &TimeSeries,
    noise: &NoiseModel,
    cfg: &ParticleFilterConfig,
    seed: u64,
) -> Result<f64> {
    theta.validate()?;
    let table = FilterNoise::new(ts, cfg, cfg.substep(theta), seed)?;
    let sampler = match cfg.init {
        InitialState::Equilibrium => Some(EquilibriumSampler::new(theta, cfg.family)?),
        InitialState::Fixed(_) => None,
    };
    filter_loglik(theta, sampler.as_ref(), ts, noise, cfg, &table)
}

/// Run the filter against a pre-drawn noise table. `sampler` is required
/// when particles start from the equilibrium density.
pub fn filter_loglik(
    theta: &SdwParams,
    sampler: Option<&EquilibriumSampler>,
    ts: &TimeSeries,
    noise: &NoiseModel,
    cfg: &ParticleFilterConfig,
    table: &FilterNoise,
) -> Result<f64> {
    let n = table.n_particles;
    if n != cfg.n_particles || table.gaps.len() != ts.len() {
        return Err(Error::invalid("noise table does not match the filter configuration"));
    }
    let mut particles: Vec<f64> = match (cfg.init, sampler) {
        (InitialState::Equilibrium, Some(s)) => table.init_uniforms.iter().map(|&u| s.quantile(u)).collect(),
        (InitialState::Equilibrium, None) => {
            return Err(Error::invalid("equilibrium initialisation needs a sampler"));
        }
        (InitialState::Fixed(x0), _) => vec![x0; n],
    };
    let mut next = vec![0.0; n];
    let mut weights = vec![0.0; n];

    let inv_var = 1.0 / (noise.sigma() * noise.sigma());
    let log_norm = -noise.sigma().ln() - 0.5 * LN_2PI - (n as f64).ln();
    let p = *theta;
    let h_max = cfg.substep(theta);

    let mut loglik = 0.0;
    for (i, (&y, &gap)) in ts.values.iter().zip(&table.gaps).enumerate() {
        let n_sub = cfg.substeps(gap, h_max);
        let (start, cap) = table.blocks[i];
        if n_sub > cap {
            return Err(Error::invalid("noise table too coarse for this parameter vector"));
        }
        if n_sub > 0 {
            let h = gap / n_sub as f64;
            let scale = noise_scale(p.kappa, h);
            for k in 0..n_sub {
                let xi = &table.normals[start + k * n..start + (k + 1) * n];
                match cfg.family {
                    WellFamily::DoubleWell => propagate(&mut particles, xi, h, scale, |x| double_well_drift(x, &p)),
                    WellFamily::MultiWell => propagate(&mut particles, xi, h, scale, |x| multi_well_drift(x, &p)),
                }
            }
        }
        if !particles.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { step: i, time: ts.times()[i] });
        }

        let mut max_lw = f64::NEG_INFINITY;
        for (w, &x) in weights.iter_mut().zip(&particles) {
            let r = y - x;
            *w = -0.5 * r * r * inv_var;
            max_lw = max_lw.max(*w);
        }
        let mut total = 0.0;
        for w in weights.iter_mut() {
            let d = *w - max_lw;
            // below exp's underflow threshold anyway
            *w = if d > -700.0 { d.exp() } else { 0.0 };
            total += *w;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical(format!("particle weights degenerate at observation {i}")));
        }
        loglik += max_lw + total.ln() + log_norm;

        systematic_resample(&particles, &weights, total, table.offsets[i], &mut next);
        std::mem::swap(&mut particles, &mut next);
    }
    Ok(loglik)
}

#[inline(always)]
fn propagate<F: Fn(f64) -> f64>(xs: &mut [f64], xi: &[f64], h: f64, scale: f64, drift: F) {
    for (x, &e) in xs.iter_mut().zip(xi) {
        let s = h * drift(*x);
        let s = if s > MAX_DRIFT_STEP { MAX_DRIFT_STEP } else { s };
        let s = if s < -MAX_DRIFT_STEP { -MAX_DRIFT_STEP } else { s };
        *x += s + scale * e;
    }
}

/// Systematic resampling with a single uniform offset `u`.
fn systematic_resample(particles: &[f64], weights: &[f64], total: f64, u: f64, out: &mut [f64]) {
    let n = particles.len();
    let step = total / n as f64;
    let mut target = u * step;
    let mut cum = weights[0];
    let mut j = 0;
    for slot in out.iter_mut() {
        while cum < target && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        *slot = particles[j];
        target += step;
    }
}
