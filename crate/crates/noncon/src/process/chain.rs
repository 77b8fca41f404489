//! Finite-state Markov chains.
//!
//! Besides plain path simulation, this module provides the two exact
//! primitives the verification suites lean on:
//!
//! - `phi_exact`: the φ-mixing coefficient of a stationary chain, computed as
//!   the worst total-variation distance between a row of the n-step matrix
//!   and the stationary law,
//!
//!   ```text
//!   φ(n) = max_i TV(Pⁿ(i,·), π) = max_i ½ Σ_j |Pⁿ(i,j) − π_j|
//!   ```
//!
//! - `GapSampler`: samples a chain only at a sparse, increasing set of time
//!   indices (the values q_j(n) of an index family) by jumping over the gaps
//!   with cached matrix powers, so horizons with q(N) ~ N² stay affordable.

use crate::error::{Error, Result};
use crate::rng::stream2;
use crate::stats::ksum;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Row-stochastic finite chain with an explicit initial law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteChain {
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

const STOCHASTIC_TOL: f64 = 1e-12;

impl FiniteChain {
    pub fn new(transition: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        let n = transition.len();
        if n == 0 {
            return Err(Error::Validation("empty transition matrix".into()));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonStochastic(format!("row {i} has length {}", row.len())));
            }
            if row.iter().any(|&p| p < 0.0) {
                return Err(Error::NonStochastic(format!("row {i} has a negative entry")));
            }
            let s = ksum(row.iter().copied());
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NonStochastic(format!("row {i} sums to {s}")));
            }
        }
        if initial.len() != n
            || initial.iter().any(|&p| p < 0.0)
            || (ksum(initial.iter().copied()) - 1.0).abs() > STOCHASTIC_TOL
        {
            return Err(Error::NonStochastic("initial law".into()));
        }
        Ok(Self { transition, initial })
    }

    /// Chain with the given transition matrix started from its stationary law.
    pub fn stationary_start(transition: Vec<Vec<f64>>) -> Result<Self> {
        let tmp = Self::new(transition.clone(), uniform_law(transition.len()))?;
        let pi = tmp.stationary()?;
        Self::new(transition, pi)
    }

    /// An iid sequence: every row equals the given law.
    pub fn iid(law: Vec<f64>) -> Result<Self> {
        let rows = vec![law.clone(); law.len()];
        Self::new(rows, law)
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    /// True when every state reaches every other through positive-probability
    /// transitions (single communicating class).
    pub fn is_irreducible(&self) -> bool {
        let n = self.n_states();
        let reach = |forward: bool| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let p = if forward {
                        self.transition[i][j]
                    } else {
                        self.transition[j][i]
                    };
                    if p > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        };
        reach(true).into_iter().all(|b| b) && reach(false).into_iter().all(|b| b)
    }

    /// Unique stationary law, by solving π(P − I) = 0, Σπ = 1.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        if !self.is_irreducible() {
            return Err(Error::ReducibleChain);
        }
        let n = self.n_states();
        // columns: (P^T - I) with the last equation replaced by Σπ = 1
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = self.transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        b[n - 1] = 1.0;
        let lu = a.lu();
        let pi = lu
            .solve(&b)
            .ok_or_else(|| Error::Validation("singular stationary system".into()))?;
        Ok(pi.iter().copied().collect())
    }

    /// Dense n-step transition matrix Pⁿ.
    pub fn matrix_power(&self, n: usize) -> Vec<Vec<f64>> {
        let dim = self.n_states();
        let mut result = identity(dim);
        let mut base = self.transition.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = mat_mul(&result, &base);
            }
            base = mat_mul(&base, &base);
            k >>= 1;
        }
        result
    }

    /// Exact φ(n) of the stationary chain.
    pub fn phi_exact(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Validation("phi is defined for n >= 1".into()));
        }
        let pi = self.stationary()?;
        let pn = self.matrix_power(n);
        let mut worst = 0.0f64;
        for row in &pn {
            let tv = 0.5 * ksum(row.iter().zip(&pi).map(|(p, q)| (p - q).abs()));
            worst = worst.max(tv);
        }
        Ok(worst.clamp(0.0, 1.0))
    }

    /// Simulate `n_steps` states X_1..X_{n_steps}; X_0 is drawn from the
    /// initial law and not reported. Deterministic in (seed, replica).
    pub fn simulate(&self, n_steps: usize, seed: u64) -> Result<Vec<u32>> {
        self.simulate_replica(n_steps, seed, 0)
    }

    pub fn simulate_replica(&self, n_steps: usize, seed: u64, replica: u64) -> Result<Vec<u32>> {
        if n_steps == 0 {
            return Err(Error::Validation("n_steps must be >= 1".into()));
        }
        let cdf_init = cdf(&self.initial);
        let cdf_rows: Vec<Vec<f64>> = self.transition.iter().map(|r| cdf(r)).collect();
        let mut rng = stream2(seed, 0x4348_4149, replica);
        let mut state = draw(&cdf_init, rng.gen::<f64>());
        let mut out = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            state = draw(&cdf_rows[state], rng.gen::<f64>());
            out.push(state as u32);
        }
        Ok(out)
    }
}

fn uniform_law(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn cdf(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(row.len());
    for &p in row {
        acc += p;
        out.push(acc);
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn draw(cdf: &[f64], u: f64) -> usize {
    match cdf.iter().position(|&c| u < c) {
        Some(i) => i,
        None => cdf.len() - 1,
    }
}

/// Samples a chain at a sparse increasing index set by jumping gaps with
/// cached transition powers.
pub struct GapSampler {
    indices: Vec<u64>,
    /// slot of the cached gap matrix used by the s-th jump
    jump_slots: Vec<usize>,
    /// cumulative rows of P^gap per distinct gap
    matrices: Vec<Vec<Vec<f64>>>,
    init_cdf: Vec<f64>,
}

impl GapSampler {
    /// `indices` must be strictly increasing times (>= 1). The chain is
    /// started from its initial law at time 0.
    pub fn new(chain: &FiniteChain, indices: Vec<u64>) -> Result<Self> {
        if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "indices must be non-empty and strictly increasing".into(),
            ));
        }
        if indices[0] == 0 {
            return Err(Error::Validation("indices must be >= 1".into()));
        }
        let mut gaps = Vec::with_capacity(indices.len());
        let mut prev = 0u64;
        for &i in &indices {
            gaps.push(i - prev);
            prev = i;
        }
        let mut cache: BTreeMap<u64, usize> = BTreeMap::new();
        let mut matrices: Vec<Vec<Vec<f64>>> = Vec::new();
        for &g in &gaps {
            if !cache.contains_key(&g) {
                let m = chain.matrix_power(g as usize);
                cache.insert(g, matrices.len());
                matrices.push(m.iter().map(|r| cdf(r)).collect());
            }
        }
        let jump_slots = gaps.iter().map(|g| cache[g]).collect();
        Ok(Self {
            indices,
            jump_slots,
            matrices,
            init_cdf: cdf(&chain.initial),
        })
    }

    /// States at the requested indices for one replica.
    pub fn sample(&self, seed: u64, replica: u64) -> Vec<u32> {
        let mut rng = stream2(seed, 0x4741_5053, replica);
        let mut state = draw(&self.init_cdf, rng.gen::<f64>());
        let mut out = Vec::with_capacity(self.indices.len());
        for &slot in &self.jump_slots {
            state = draw(&self.matrices[slot][state], rng.gen::<f64>());
            out.push(state as u32);
        }
        out
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }
}

/// Exact E[Π_s f_s(ξ_{t_s})] for a finite chain observed at increasing times,
/// via the forward recursion row · D_{f_1} · P^{g_2} · D_{f_2} · ... · 1.
pub fn expectation_of_products(chain: &FiniteChain, times: &[u64], fs: &[Vec<f64>]) -> Result<f64> {
    if times.len() != fs.len() || times.is_empty() {
        return Err(Error::Validation("times and functions must align".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("times must be strictly increasing".into()));
    }
    let n = chain.n_states();
    // distribution row at the first time
    let first = chain.matrix_power(times[0] as usize);
    let mut row: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| chain.initial[i] * first[i][j]).sum())
        .collect();
    for (s, f) in fs.iter().enumerate() {
        if f.len() != n {
            return Err(Error::DimensionMismatch("test function length".into()));
        }
        for (r, &fv) in row.iter_mut().zip(f) {
            *r *= fv;
        }
        if s + 1 < times.len() {
            let gap = (times[s + 1] - times[s]) as usize;
            let pg = chain.matrix_power(gap);
            let mut next = vec![0.0; n];
            for i in 0..n {
                if row[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    next[j] += row[i] * pg[i][j];
                }
            }
            row = next;
        }
    }
    Ok(ksum(row.into_iter()))
}
