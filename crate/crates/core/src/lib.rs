pub mod classifiers;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod observation;
pub mod rng;

pub use error::{Error, Result};
