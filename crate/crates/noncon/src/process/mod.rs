//! Mixing process models: finite-state Markov chains and functionals of
//! Bernoulli shifts, with coupled window-approximants and estimators for the
//! φ-mixing coefficients and the approximation rates β_p(r).

mod bernoulli;
mod chain;
mod mixing;

pub use bernoulli::{build_bernoulli, BaseNoise, BernoulliFunctional, CoupledTrajectory, GSpec};
pub use chain::{expectation_of_products, FiniteChain, GapSampler};
pub use mixing::{estimate_beta, phi_empirical, MixingReport};
