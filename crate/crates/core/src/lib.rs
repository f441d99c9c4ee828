//! Simulation and verification toolkit for running maxima of log-prices
//! driven by jump models with stochastic intensity (CIR-modulated Cox and
//! self-exciting Hawkes), with martingale-representation integrands,
//! closed-form first-passage tails and lookback pricing.

pub mod clark_ocone;
pub mod config;
pub mod error;
pub mod first_passage;
pub mod laplace;
pub mod malliavin;
pub mod model;
pub mod path;
pub mod pricing;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
