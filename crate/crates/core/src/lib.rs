//! Reconstruction of radio-frequency maps from sparse RSS measurements and
//! a benchmark of MLP localizers trained on each reconstruction.
//!
//! The pipeline: [`env_sim`] builds a synthetic ground-truth map,
//! [`sampling`] simulates a measurement campaign, [`interpolation`] completes
//! the sparse grid, [`gan`] learns the joint location/RSS distribution for
//! augmentation, and [`localizer`] trains and scores the position regressor.

pub mod config;
pub mod env_sim;
pub mod error;
pub mod gan;
pub mod interpolation;
pub mod localizer;
pub mod neuralnet;
pub mod sampling;
pub mod seed;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
