//! Rate-distortion regions for the L-channel multiple-descriptions problem:
//! a single shared message (VKG) versus one shared message per subset of
//! descriptions (CMS), with the entropy calculus, linear programs, searches
//! and a small random-coding simulator behind them.
//!
//! Evaluators are generic over the scalar type; the aliases below fix it to
//! `f64`, which is what the searches and the simulator use.

pub mod error;
pub mod io;
pub mod lattice;
pub mod lp;
pub mod probability;
pub mod regions;
pub mod scalar;
pub mod search;
pub mod shannon;
pub mod sim;

pub use error::{Error, Result};

pub type Distribution = probability::JointDistribution<f64>;
pub type Model = regions::AuxModel<f64>;
pub type Allocation = regions::RateAllocation<f64>;
pub type Rates = regions::RateVector<f64>;
pub type Distortions = regions::DistortionVector<f64>;
pub type MinRates = regions::MinRates<f64>;
