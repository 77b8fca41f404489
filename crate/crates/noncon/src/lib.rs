//! Numerical laboratory for local central limit theorems of nonconventional
//! sums `S_N = Σ_n G(X_{q_1(n)}, ..., X_{q_ℓ(n)})`.
//!
//! The crate is organized around the objects that drive such limit theorems:
//!
//! - [`process`]: finite-state chains and Bernoulli functionals together with
//!   their φ-mixing coefficients and window-approximation rates β_p(r).
//! - [`tower`]: Young towers over an interval base — floors, return times,
//!   separation metrics, reference measures and the invariant density.
//! - [`ops`]: discretized transfer operators on a tower (plain, normalized,
//!   weighted and twisted), weighted norms, Lasota–Yorke verification,
//!   Ruelle–Perron–Frobenius iteration and spectral-radius probes.
//! - [`cone`]: the projective cone of positive tower functions, its canonical
//!   complexification, Hilbert metrics and contraction certificates.
//! - [`sums`]: index families, observables, the centering decomposition, the
//!   ζ-functions controlling characteristic-function decay, asymptotic
//!   variance and the auxiliary Y/Ξ processes.
//! - [`llt`]: characteristic-function estimation, decay-rate fits,
//!   conditioning-bound verification, dependency graphs and empirical
//!   CLT/LCLT tests.
//!
//! Everything is seeded explicitly and deterministic: re-running any
//! computation with the same inputs reproduces results bit for bit.

pub mod cone;
pub mod error;
pub mod llt;
pub mod ops;
pub mod process;
pub mod rng;
pub mod stats;
pub mod sums;
pub mod tower;

pub use error::{Error, Result};
