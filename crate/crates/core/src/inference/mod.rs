//! Finite-grid posterior inference over model parameters.

pub mod engine;
pub mod grid;
pub mod likelihood;
pub mod posterior;

pub use engine::SdwPosteriorEngine;
pub use grid::{normalize_grid_coords, sdw_default_grid, ParamGrid, ParamVector, UnitCube};
pub use likelihood::{
    filter_loglik, ode_loglik, path_loglik, FilterNoise, sde_marginal_loglik, InitialState, NoiseModel, OdeModel, ParticleFilterConfig,
    PulseOdeModel,
};
pub use posterior::{
    grid_posterior, map_estimate, marginalize, posterior_entropy, posterior_from_logliks, GridPosterior, Prior,
};
