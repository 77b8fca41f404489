//! Functionals of Bernoulli shifts, X_n = g(..., ε_{n-1}, ε_n, ε_{n+1}, ...),
//! together with the coupled window-approximants
//!
//! ```text
//! X_{n,r} = g(..., ε^{(n)}_{n-r-1}, ε_{n-r}, ..., ε_{n+r}, ε^{(n)}_{n+r+1}, ...)
//! ```
//!
//! which share the driving noise inside the window [n-r, n+r] and use a fresh
//! independent copy ε^{(n)} outside. Noise is counter-based: ε_k is a pure
//! function of (seed, k, copy id), so the per-index copies never have to be
//! stored and window-locality can be asserted exactly.

use crate::error::{Error, Result};
use crate::rng::uniform_at;
use serde::{Deserialize, Serialize};

/// Distribution of a single noise symbol ε_k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BaseNoise {
    /// Finite alphabet given by atom positions and probabilities.
    FiniteAtoms { points: Vec<f64>, probs: Vec<f64> },
    /// Uniform on [0, 1).
    Uniform01,
}

impl BaseNoise {
    fn validate(&self) -> Result<()> {
        if let BaseNoise::FiniteAtoms { points, probs } = self {
            if points.len() != probs.len() || points.is_empty() {
                return Err(Error::Validation("atom points/probs mismatch".into()));
            }
            let s: f64 = probs.iter().sum();
            if probs.iter().any(|&p| p < 0.0) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::Validation("atom probabilities must sum to 1".into()));
            }
        }
        Ok(())
    }

    /// Map a uniform draw to a symbol value.
    fn symbol(&self, u: f64) -> f64 {
        match self {
            BaseNoise::Uniform01 => u,
            BaseNoise::FiniteAtoms { points, probs } => {
                let mut acc = 0.0;
                for (x, p) in points.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *points.last().unwrap()
            }
        }
    }
}

/// Evaluation rule turning a noise window into X_n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GSpec {
    /// X_n = Σ_j a_j ε_{n+j}
    Linear,
    /// X_n = c regardless of the noise
    Constant(f64),
}

/// A functional of an iid sequence with a finite coefficient window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BernoulliFunctional {
    pub base: BaseNoise,
    /// coefficients a_j for j = -J..J, stored as weights[j + J]
    pub window_weights: Vec<f64>,
    pub g_spec: GSpec,
}

impl BernoulliFunctional {
    pub fn new(base: BaseNoise, window_weights: Vec<f64>, g_spec: GSpec) -> Result<Self> {
        base.validate()?;
        if window_weights.is_empty() || window_weights.len() % 2 == 0 {
            return Err(Error::Validation(
                "window_weights must have odd length 2J+1".into(),
            ));
        }
        if window_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("window weights must be finite".into()));
        }
        Ok(Self {
            base,
            window_weights,
            g_spec,
        })
    }

    /// Half-width J of the coefficient window.
    pub fn half_window(&self) -> usize {
        self.window_weights.len() / 2
    }

    fn eval<S: Fn(i64) -> f64>(&self, noise: S, n: i64) -> f64 {
        match self.g_spec {
            GSpec::Constant(c) => c,
            GSpec::Linear => {
                let j = self.half_window() as i64;
                let mut acc = 0.0;
                for (idx, &a) in self.window_weights.iter().enumerate() {
                    if a != 0.0 {
                        acc += a * noise(n + idx as i64 - j);
                    }
                }
                acc
            }
        }
    }

    /// Primary value X_n from the shared noise stream.
    pub fn x_n(&self, seed: u64, n: i64) -> f64 {
        self.eval(|k| self.base.symbol(uniform_at(seed, k, 0)), n)
    }

    /// Approximant X_{n,r}: shared noise inside [n-r, n+r], the per-index
    /// independent copy outside.
    pub fn x_nr(&self, seed: u64, n: i64, r: usize) -> f64 {
        let r = r as i64;
        self.eval(
            |k| {
                let copy = if (k - n).abs() <= r { 0 } else { n as u64 + 1 };
                self.base.symbol(uniform_at(seed, k, copy))
            },
            n,
        )
    }

    /// X_{n,r} evaluated against an arbitrary shared-noise field; used to
    /// assert window-locality by tampering with the field outside the window.
    pub fn x_nr_with_shared<S: Fn(i64) -> f64>(&self, shared: S, seed: u64, n: i64, r: usize) -> f64 {
        let r = r as i64;
        self.eval(
            |k| {
                if (k - n).abs() <= r {
                    shared(k)
                } else {
                    self.base.symbol(uniform_at(seed, k, n as u64 + 1))
                }
            },
            n,
        )
    }
}

/// A primary trajectory together with its window approximants, all driven by
/// the same seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    pub primary: Vec<f64>,
    /// (r, X_{1,r}..X_{N,r}) pairs in increasing r
    pub approximants: Vec<(usize, Vec<f64>)>,
    pub seed: u64,
}

impl CoupledTrajectory {
    pub fn len(&self) -> usize {
        self.primary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primary.is_empty()
    }

    pub fn approximant(&self, r: usize) -> Option<&[f64]> {
        self.approximants
            .iter()
            .find(|(rr, _)| *rr == r)
            .map(|(_, v)| v.as_slice())
    }
}

/// Generate X_1..X_N and the approximants for every r in `r_list`.
pub fn build_bernoulli(
    bf: &BernoulliFunctional,
    n_steps: usize,
    r_list: &[usize],
    seed: u64,
) -> Result<CoupledTrajectory> {
    if r_list.is_empty() {
        return Err(Error::Validation("r_list must be non-empty".into()));
    }
    if n_steps == 0 {
        return Err(Error::Validation("n_steps must be >= 1".into()));
    }
    let primary: Vec<f64> = (1..=n_steps as i64).map(|n| bf.x_n(seed, n)).collect();
    let mut approximants = Vec::with_capacity(r_list.len());
    let mut rs = r_list.to_vec();
    rs.sort_unstable();
    rs.dedup();
    for r in rs {
        let xs = (1..=n_steps as i64).map(|n| bf.x_nr(seed, n, r)).collect();
        approximants.push((r, xs));
    }
    Ok(CoupledTrajectory {
        primary,
        approximants,
        seed,
    })
}
