//! Deprivation-age stratified stochastic SEIR model.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the numerical kernel:
//! strata indexing and the behavioural adaptation vector ([`model`]),
//! chain-binomial forward simulation ([`simulator`]), augmented-data MCMC
//! ([`inference`]), reproduction numbers and CRPS ([`metrics`]) and the
//! what-if perturbations injected into forward runs ([`scenarios`]).
//!
//! File formats, configuration and the command line live in the
//! `stratseir-cli` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod inference;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scenarios;
pub mod simulator;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{
    Covariates, FixedConfig, Hazards, Model, ModelParams, ModelVariant, StrataLayout,
};
pub use rng::{StreamSeed, Transition};
pub use scenarios::ScenarioSpec;
pub use simulator::{EventSeries, StateMatrix, Trajectory};
