//! Twisted transfer operators and observables on tower products.
//!
//! A twisted block maps g to Base^ℓ(e^{zu} g) for a real grid function u and
//! one of the base operators P, 𝒜, L. Chaining blocks with per-block u's
//! realizes the operator families driven by an environment sequence:
//!
//! ```text
//! R_{it,x̄} = 𝒜^ℓ(e^{itG_ℓ(x̄,·)} ·)        (normalized base)
//! P_z^a    = P^ℓ(e^{z G_ℓ(a,·)} ·)          (plain base)
//! ℒ_z^ω    = L^{ℓ₀}(e^{z u_ω} ·)            (weighted base)
//! ```
//!
//! The observable G lives on Δ^ℓ; its centered last-coordinate section
//! u_a = G(a,·) − ∫G(a,y)dμ(y) is what the twists consume.

use super::{BaseKind, TransferOps};
use crate::error::{Error, Result};
use crate::stats::ksum;
use crate::tower::{Point, Tower};
use num_complex::Complex64;
use serde::Serialize;

/// Bounded observables on Δ^ℓ used by the twisted-operator machinery.
#[derive(Debug, Clone)]
pub enum TowerObservable {
    /// Π_j 1_{A_j}(x_j) with each A_j a union of grid cells.
    IndicatorProduct { masks: Vec<Vec<bool>> },
    /// Σ_j c_j · pos(x_j) with pos the global base coordinate of the point.
    LinearInCoords { coeffs: Vec<f64> },
    /// Constant observable.
    Constant { ell: usize, value: f64 },
}

impl TowerObservable {
    /// Product of indicators of the given cell sets (arity = sets.len()).
    pub fn indicator_product(tower: &Tower, sets: &[Vec<usize>]) -> Self {
        let masks = sets
            .iter()
            .map(|set| {
                let mut m = vec![false; tower.n_cells()];
                for &c in set {
                    m[c] = true;
                }
                m
            })
            .collect();
        TowerObservable::IndicatorProduct { masks }
    }

    pub fn arity(&self) -> usize {
        match self {
            TowerObservable::IndicatorProduct { masks } => masks.len(),
            TowerObservable::LinearInCoords { coeffs } => coeffs.len(),
            TowerObservable::Constant { ell, .. } => *ell,
        }
    }

    pub fn integer_valued(&self) -> bool {
        match self {
            TowerObservable::IndicatorProduct { .. } => true,
            TowerObservable::Constant { value, .. } => value.fract() == 0.0,
            TowerObservable::LinearInCoords { .. } => false,
        }
    }

    /// Evaluate at a tuple of tower points.
    pub fn eval(&self, tower: &Tower, pts: &[Point]) -> f64 {
        debug_assert_eq!(pts.len(), self.arity());
        match self {
            TowerObservable::Constant { value, .. } => *value,
            TowerObservable::IndicatorProduct { masks } => {
                for (mask, p) in masks.iter().zip(pts) {
                    let cell = tower.locate(p).expect("point outside tower");
                    if !mask[cell] {
                        return 0.0;
                    }
                }
                1.0
            }
            TowerObservable::LinearInCoords { coeffs } => coeffs
                .iter()
                .zip(pts)
                .map(|(c, p)| {
                    let w = tower.spec.branches[p.branch].base_mass;
                    c * (tower.branch_offset[p.branch] + p.u * w)
                })
                .sum(),
        }
    }

    /// The last-coordinate section G(prefix, ·) as a grid function.
    pub fn last_slot(&self, tower: &Tower, prefix: &[Point]) -> Vec<f64> {
        debug_assert_eq!(prefix.len() + 1, self.arity());
        let mut pts = prefix.to_vec();
        pts.push(Point {
            branch: 0,
            floor: 0,
            u: 0.0,
        });
        (0..tower.n_cells())
            .map(|i| {
                *pts.last_mut().unwrap() = tower.cell_center(i);
                self.eval(tower, &pts)
            })
            .collect()
    }

    /// Centered section u_prefix = G(prefix,·) − ∫G(prefix,y)dμ(y).
    pub fn centered_last_slot(&self, ops: &TransferOps, prefix: &[Point]) -> Vec<f64> {
        let mut section = self.last_slot(&ops.tower, prefix);
        let mean = ksum(section.iter().zip(&ops.mu).map(|(a, b)| a * b));
        for s in &mut section {
            *s -= mean;
        }
        section
    }
}

/// A composition of twisted blocks, applied left-to-right over `blocks`.
pub struct TwistedOp<'a> {
    pub ops: &'a TransferOps,
    pub base: BaseKind,
    /// pure base-operator steps per block (ℓ or ℓ₀)
    pub steps_per_block: usize,
    /// per-block twist functions, in application order
    pub blocks: Vec<Vec<f64>>,
    pub z: Complex64,
}

impl<'a> TwistedOp<'a> {
    pub fn new(
        ops: &'a TransferOps,
        base: BaseKind,
        steps_per_block: usize,
        blocks: Vec<Vec<f64>>,
        z: Complex64,
    ) -> Self {
        Self {
            ops,
            base,
            steps_per_block,
            blocks,
            z,
        }
    }

    /// R_{it,x̄}: a single normalized block twisted by G_ℓ(x̄,·).
    pub fn r_twisted(ops: &'a TransferOps, g: &TowerObservable, t: f64, xbar: &[Point]) -> Self {
        let u = g.centered_last_slot(ops, xbar);
        Self::new(
            ops,
            BaseKind::Normalized,
            g.arity(),
            vec![u],
            Complex64::new(0.0, t),
        )
    }

    /// P_{it}^{ȳ₀,N}: plain-base blocks along the inverse T-orbit of ȳ₀,
    /// i.e. the first block applied is the one at T^{N-1}ȳ₀.
    pub fn p_twisted_orbit(
        ops: &'a TransferOps,
        g: &TowerObservable,
        t: f64,
        ybar0: &[Point],
        n_blocks: usize,
    ) -> Result<Self> {
        let ell = g.arity();
        if ybar0.len() + 1 != ell {
            return Err(Error::DimensionMismatch(format!(
                "environment tuple has {} coordinates, observable needs {}",
                ybar0.len(),
                ell - 1
            )));
        }
        // orbit of ȳ₀ under T = F × F² × … × F^{ℓ-1}
        let mut env = Vec::with_capacity(n_blocks);
        let mut cur = ybar0.to_vec();
        env.push(cur.clone());
        for _ in 1..n_blocks {
            for (slot, p) in cur.iter_mut().enumerate() {
                for _ in 0..slot + 1 {
                    *p = ops.tower.tower_map(p)?;
                }
            }
            env.push(cur.clone());
        }
        env.reverse(); // first applied block sits at the end of the orbit
        let blocks = env
            .iter()
            .map(|tuple| g.centered_last_slot(ops, tuple))
            .collect();
        Ok(Self::new(
            ops,
            BaseKind::Plain,
            ell,
            blocks,
            Complex64::new(0.0, t),
        ))
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Apply the full composition to a complex grid function.
    pub fn apply(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut cur = g.to_vec();
        for u in &self.blocks {
            for (c, &ui) in cur.iter_mut().zip(u) {
                *c *= (self.z * ui).exp();
            }
            for _ in 0..self.steps_per_block {
                cur = self.ops.apply_base_complex(self.base, &cur);
            }
        }
        cur
    }

    /// Apply only the first `k` blocks.
    pub fn apply_partial(&self, g: &[Complex64], k: usize) -> Vec<Complex64> {
        let mut cur = g.to_vec();
        for u in self.blocks.iter().take(k) {
            for (c, &ui) in cur.iter_mut().zip(u) {
                *c *= (self.z * ui).exp();
            }
            for _ in 0..self.steps_per_block {
                cur = self.ops.apply_base_complex(self.base, &cur);
            }
        }
        cur
    }
}

/// Lattice classification verdict for a periodic-orbit observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LatticeClass {
    NonArithmetic,
    Lattice,
    /// Constant on the grid, or an eigenvalue of modulus one showed up at a
    /// probed nonzero frequency (cohomologous to a constant).
    Degenerate,
}

/// The observable G_{x₀,n₀} accumulated along a periodic orbit, with its
/// classification by the spectral-radius probe.
#[derive(Debug, Clone)]
pub struct PeriodicObservable {
    pub values: Vec<f64>,
    pub class: LatticeClass,
    /// (t, radius estimate) pairs from the probe grid
    pub radius_probes: Vec<(f64, f64)>,
    pub period: usize,
}

/// Build `G_{x₀,n₀}(x) = Σ_{k<n₀} G(F^k x₀, F^{2k} x₀, …, F^{(ℓ-1)k} x₀, F^{ℓk} x)`
/// and classify it as non-arithmetic / lattice / degenerate.
pub fn periodic_observable(
    ops: &TransferOps,
    g: &TowerObservable,
    x0: Point,
    n0: usize,
) -> Result<PeriodicObservable> {
    let tower = &ops.tower;
    // verify periodicity of x0
    let mut p = x0;
    for _ in 0..n0 {
        p = tower.tower_map(&p)?;
    }
    let same = p.branch == x0.branch && p.floor == x0.floor && (p.u - x0.u).abs() < 1e-9;
    if !same {
        return Err(Error::NotPeriodic(n0));
    }

    let ell = g.arity();
    let n_cells = tower.n_cells();
    let mut values = vec![0.0; n_cells];
    // orbit positions F^{jk} x0 for the prefix slots
    for k in 0..n0 {
        let mut prefix = Vec::with_capacity(ell - 1);
        for j in 1..ell {
            let mut q = x0;
            for _ in 0..j * k {
                q = tower.tower_map(&q)?;
            }
            prefix.push(q);
        }
        for (i, val) in values.iter_mut().enumerate() {
            let mut x = tower.cell_center(i);
            for _ in 0..ell * k {
                x = tower.tower_map(&x)?;
            }
            let mut pts = prefix.clone();
            pts.push(x);
            *val += g.eval(tower, &pts);
        }
    }

    // classification by the twisted-operator radius
    let span = values.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    if span.1 - span.0 < 1e-9 {
        return Ok(PeriodicObservable {
            values,
            class: LatticeClass::Degenerate,
            radius_probes: Vec::new(),
            period: n0,
        });
    }
    let t_grid: Vec<f64> = if g.integer_valued() {
        (1..=6)
            .map(|i| i as f64 * std::f64::consts::PI / 6.0)
            .collect()
    } else {
        vec![0.3, 0.7, 1.3, 2.1, 3.4, 5.0]
    };
    let mut probes = Vec::new();
    let mut any_unimodular = false;
    for &t in &t_grid {
        let op = TwistedOp::new(
            ops,
            BaseKind::Plain,
            ell * n0,
            vec![values.clone()],
            Complex64::new(0.0, t),
        );
        let rep = super::spectral::spectral_radius(&op, 3, 160);
        probes.push((t, rep.radius));
        if rep.radius >= 1.0 - 1e-6 {
            any_unimodular = true;
        }
    }
    let class = if any_unimodular {
        LatticeClass::Degenerate
    } else if g.integer_valued() {
        LatticeClass::Lattice
    } else {
        LatticeClass::NonArithmetic
    };
    Ok(PeriodicObservable {
        values,
        class,
        radius_probes: probes,
        period: n0,
    })
}
