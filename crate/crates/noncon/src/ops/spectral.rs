//! Spectral-radius probes for twisted operators.
//!
//! The production estimate iterates the operator on random starts, measures
//! the per-step growth of the weighted norm ‖·‖_W and averages the log
//! growth factors after a burn-in; the radius is the exponential of that
//! mean. A dense oracle assembles the full matrix, embeds it as a real
//! 2n×2n block matrix and takes eigenvalue moduli, for cross-checks on
//! small grids.

use super::twisted::TwistedOp;
use crate::error::{Error, Result};
use crate::stats::linear_fit;
use crate::tower::TowerFunction;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub radius: f64,
    /// modulus gap to the next eigenvalue, when a dense oracle supplied it
    pub gap: Option<f64>,
    /// (slope, rms residual) of the log-norm growth fit
    pub norm_growth_fit: (f64, f64),
    /// false when the growth factors had not settled; the radius is then an
    /// interval midpoint from the norm growth rather than a converged limit
    pub converged: bool,
}

/// Power/growth estimate of the spectral radius of a twisted composition on
/// the ‖·‖_W grid space.
pub fn spectral_radius(op: &TwistedOp, probes: usize, iters: usize) -> SpectralReport {
    let n = op.ops.n_cells();
    let mut best_factors: Vec<f64> = Vec::new();
    for probe in 0..probes.max(1) {
        let mut rng = crate::rng::stream2(0x5350_4543, probe as u64, 0);
        let mut g: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut factors = Vec::with_capacity(iters);
        for _ in 0..iters {
            let next = op.apply(&g);
            let (_, _, w) = op
                .ops
                .weighted_norms_complex(&TowerFunction::new(next.clone()));
            if w == 0.0 || !w.is_finite() {
                factors.push(f64::NEG_INFINITY);
                break;
            }
            factors.push(w.ln());
            g = next.iter().map(|c| c / w).collect();
        }
        if best_factors.is_empty() || factors.len() > best_factors.len() {
            best_factors = factors.clone();
        }
        // keep the probe with the largest tail growth (dominant direction)
        let tail = |f: &Vec<f64>| {
            let half = f.len() / 2;
            f[half..].iter().sum::<f64>() / (f.len() - half).max(1) as f64
        };
        if tail(&factors) > tail(&best_factors) {
            best_factors = factors;
        }
    }
    let m = best_factors.len();
    let half = m / 2;
    let tail = &best_factors[half..];
    let mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let radius = mean.exp();
    // growth fit of cumulative log-norms
    let mut cum = 0.0;
    let cums: Vec<f64> = best_factors
        .iter()
        .map(|f| {
            cum += f;
            cum
        })
        .collect();
    let xs: Vec<f64> = (0..m).map(|i| i as f64).collect();
    let (_, slope, resid) = linear_fit(&xs[half..], &cums[half..]);
    let spread = tail
        .iter()
        .map(|f| (f - mean).abs())
        .fold(0.0f64, f64::max);
    SpectralReport {
        radius,
        gap: None,
        norm_growth_fit: (slope.exp(), resid),
        converged: spread < 5e-3 || resid < 1e-6,
    }
}

/// Dense eigenvalue oracle: assembles the operator matrix column by column,
/// embeds ℂ^n into ℝ^{2n} and reads eigenvalue moduli off the real Schur
/// form. Returns (radius, gap to the next distinct modulus).
pub fn dense_radius_oracle(op: &TwistedOp) -> Result<(f64, f64)> {
    let n = op.ops.n_cells();
    if n > 1500 {
        return Err(Error::Unsupported(format!(
            "dense eigen oracle capped at 1500 cells, grid has {n}"
        )));
    }
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[i] = Complex64::new(1.0, 0.0);
        cols.push(op.apply(&e));
    }
    // real embedding [[Re, -Im], [Im, Re]]
    let mut m = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = v.re;
            m[(i, j + n)] = -v.im;
            m[(i + n, j)] = v.im;
            m[(i + n, j + n)] = v.re;
        }
    }
    let eig = m.complex_eigenvalues();
    let mut moduli: Vec<f64> = eig.iter().map(|c| c.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let radius = moduli[0];
    let gap = moduli
        .iter()
        .find(|&&v| v < radius - 1e-10)
        .map(|v| radius - v)
        .unwrap_or(0.0);
    Ok((radius, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::test_towers::golden_tower;
    use crate::ops::{BaseKind, TransferOps, TowerObservable};
    use crate::tower::Point;

    fn ops(grid: usize) -> TransferOps {
        TransferOps::new(golden_tower(grid), 1e-12, 500).unwrap()
    }

    #[test]
    fn untwisted_radius_is_one() {
        let ops = ops(16);
        let op = TwistedOp::new(
            &ops,
            BaseKind::Plain,
            2,
            vec![vec![0.0; ops.n_cells()]],
            Complex64::new(0.0, 0.0),
        );
        let rep = spectral_radius(&op, 2, 120);
        assert!((rep.radius - 1.0).abs() < 1e-8, "radius={}", rep.radius);
        let (dense, gap) = dense_radius_oracle(&op).unwrap();
        assert!((dense - 1.0).abs() < 1e-10);
        assert!(gap > 0.0, "aperiodic tower has a spectral gap");
    }

    #[test]
    fn lattice_indicator_twist_contracts_at_pi() {
        let ops = ops(16);
        let t = &ops.tower;
        // integer observable 1_branch0(x)·1_branch0(y) at the fixed point u=0
        let set: Vec<usize> = (0..t.grid_per_cell()).map(|s| t.cell_at(0, 0, s)).collect();
        let g = TowerObservable::indicator_product(t, &[set.clone(), set]);
        let x0 = Point {
            branch: 0,
            floor: 0,
            u: 0.0,
        };
        let po = crate::ops::periodic_observable(&ops, &g, x0, 1).unwrap();
        assert_eq!(po.class, crate::ops::LatticeClass::Lattice);
        let op = TwistedOp::new(
            &ops,
            BaseKind::Plain,
            2,
            vec![po.values.clone()],
            Complex64::new(0.0, std::f64::consts::PI),
        );
        let (dense, _) = dense_radius_oracle(&op).unwrap();
        assert!(dense < 1.0 - 1e-3, "dense radius {dense}");
        let rep = spectral_radius(&op, 3, 200);
        assert!(
            (rep.radius - dense).abs() < 0.05,
            "power={} dense={}",
            rep.radius,
            dense
        );
    }

    #[test]
    fn degenerate_zero_observable_keeps_radius_one_at_every_t() {
        let ops = ops(12);
        let zero = vec![0.0; ops.n_cells()];
        for t in [0.5, 1.0, std::f64::consts::PI] {
            let op = TwistedOp::new(
                &ops,
                BaseKind::Plain,
                2,
                vec![zero.clone()],
                Complex64::new(0.0, t),
            );
            let (dense, _) = dense_radius_oracle(&op).unwrap();
            assert!((dense - 1.0).abs() < 1e-10, "t={t} radius={dense}");
        }
    }
}
