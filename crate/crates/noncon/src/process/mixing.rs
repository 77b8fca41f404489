//! Estimators for the mixing/approximation coefficients of a process.
//!
//! β_p(r) is reported as the coupling upper bound ‖d(X_n, X_{n,r})‖_p — the
//! quantity the limit theorems actually consume — rather than the infimum
//! over all window-measurable approximants. φ for non-Markov processes is a
//! plug-in estimate over finite cylinder events of a fixed depth.

use crate::error::{Error, Result};
use crate::process::CoupledTrajectory;
use crate::stats::{fit_decay, ksum, DecayFit};
use serde::Serialize;
use std::collections::HashMap;

/// Mixing summary: φ estimates, β_p(r) estimates and a decay-law fit.
#[derive(Debug, Clone, Serialize)]
pub struct MixingReport {
    /// (n, estimate, 3σ half-width)
    pub phi: Vec<(usize, f64, f64)>,
    /// (p, r, estimate, half-width)
    pub beta: Vec<(f64, usize, f64, f64)>,
    /// power/exponential fit of r -> β_p(r); θ₂ = ∞ flags exponential decay
    pub fit: Option<DecayFit>,
}

impl MixingReport {
    pub fn theta2(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.theta)
    }
}

/// Monte Carlo estimate of β_p(r) = sup_n ‖d(X_n, X_{n,r})‖_p from a coupled
/// trajectory, with a decay fit across the available r values.
pub fn estimate_beta(traj: &CoupledTrajectory, p: f64) -> Result<MixingReport> {
    if p < 1.0 {
        return Err(Error::Validation("order p must be >= 1".into()));
    }
    if traj.approximants.is_empty() {
        return Err(Error::Validation("no approximants present".into()));
    }
    let n = traj.len() as f64;
    let mut beta = Vec::new();
    for (r, xs) in &traj.approximants {
        let moments: Vec<f64> = traj
            .primary
            .iter()
            .zip(xs)
            .map(|(a, b)| (a - b).abs().powf(p))
            .collect();
        let m = ksum(moments.iter().copied()) / n;
        let var = ksum(moments.iter().map(|x| (x - m) * (x - m))) / (n - 1.0).max(1.0);
        let ci_m = 3.0 * (var / n).sqrt();
        let est = m.powf(1.0 / p);
        let hi = (m + ci_m).powf(1.0 / p);
        let lo = (m - ci_m).max(0.0).powf(1.0 / p);
        beta.push((p, *r, est, 0.5 * (hi - lo)));
    }
    // fit only over strictly positive estimates at r >= 1
    let xs: Vec<f64> = beta
        .iter()
        .filter(|(_, r, e, _)| *r >= 1 && *e > 0.0)
        .map(|(_, r, _, _)| *r as f64)
        .collect();
    let ys: Vec<f64> = beta
        .iter()
        .filter(|(_, r, e, _)| *r >= 1 && *e > 0.0)
        .map(|(_, _, e, _)| *e)
        .collect();
    let fit = if xs.len() >= 3 {
        Some(fit_decay(&xs, &ys))
    } else {
        None
    };
    Ok(MixingReport {
        phi: Vec::new(),
        beta,
        fit,
    })
}

/// Plug-in φ(n) estimate over cylinder events of the given depth for a
/// finite-alphabet trajectory. This is an empirical estimate, not the exact
/// coefficient; the half-width comes from an 8-fold segment split.
pub fn phi_empirical(states: &[u32], gap: usize, depth: usize) -> Result<(f64, f64)> {
    if depth == 0 || gap == 0 {
        return Err(Error::Validation("gap and depth must be >= 1".into()));
    }
    let need = 2 * depth + gap;
    if states.len() < need + 8 {
        return Err(Error::InsufficientData(format!(
            "trajectory of length {} cannot host depth-{depth} cylinders at gap {gap}",
            states.len()
        )));
    }
    let segments = 8;
    let seg_len = states.len() / segments;
    let mut per_segment = Vec::with_capacity(segments);
    for s in 0..segments {
        let chunk = &states[s * seg_len..(s + 1) * seg_len];
        if chunk.len() >= need + 1 {
            per_segment.push(phi_on_slice(chunk, gap, depth));
        }
    }
    let k = per_segment.len() as f64;
    let mean = ksum(per_segment.iter().copied()) / k;
    let var = ksum(per_segment.iter().map(|x| (x - mean) * (x - mean))) / (k - 1.0).max(1.0);
    Ok((mean.clamp(0.0, 1.0), 3.0 * (var / k).sqrt()))
}

fn phi_on_slice(states: &[u32], gap: usize, depth: usize) -> f64 {
    let mut joint: HashMap<(u64, u64), f64> = HashMap::new();
    let mut past: HashMap<u64, f64> = HashMap::new();
    let mut future: HashMap<u64, f64> = HashMap::new();
    let need = 2 * depth + gap;
    let mut count = 0.0;
    for k in 0..states.len().saturating_sub(need) {
        let a = encode(&states[k..k + depth]);
        let b = encode(&states[k + depth + gap - 1..k + 2 * depth + gap - 1]);
        *joint.entry((a, b)).or_default() += 1.0;
        *past.entry(a).or_default() += 1.0;
        *future.entry(b).or_default() += 1.0;
        count += 1.0;
    }
    let mut phi_max = 0.0f64;
    for (a, pa) in &past {
        if *pa < 8.0 {
            continue; // too few visits for a conditional estimate
        }
        for (b, fb) in &future {
            let jc = joint.get(&(*a, *b)).copied().unwrap_or(0.0);
            let d = (jc / pa - fb / count).abs();
            if d > phi_max {
                phi_max = d;
            }
        }
    }
    phi_max
}

fn encode(symbols: &[u32]) -> u64 {
    let mut code = 0u64;
    for &s in symbols {
        code = code.wrapping_mul(1_000_003).wrapping_add(s as u64 + 1);
    }
    code
}
