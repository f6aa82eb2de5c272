//! Probability of emergence, reproduction number and epidemic size for viral
//! spread on configuration-model networks where each individual wears one of
//! several mask types, together with a Monte Carlo simulator to check them.

pub mod analytic;
pub mod config;
pub mod degree;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod netgen;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use analytic::{summarize, AnalyticSummary, SolverOptions};
pub use degree::DegreeModel;
pub use ensemble::{MaskEnsemble, Positivity};
pub use error::{Error, Result};
pub use netgen::ContactNetwork;
pub use sim::{monte_carlo, monte_carlo_policies, EmergenceThreshold, MonteCarloConfig, SeedPolicy, TrialAggregate};
