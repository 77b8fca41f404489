//! Discretized transfer operators on a tower.
//!
//! The plain operator is the dual of composition by the tower map,
//!
//! ```text
//! Pg(x) = Σ_{y ∈ F⁻¹{x}} g(y) / JF(y),
//! ```
//!
//! realized as a Galerkin/Ulam matrix on the grid: the entry (i, c) is
//! m₀(F⁻¹(cell_i) ∩ cell_c) / m₀(cell_i). On floors k ≥ 1 the action is the
//! exact shift-down (each cell pulls the value of the cell one floor below);
//! on the base it sums branch-top preimages weighted by the inverse return
//! Jacobian. Column sums of the mass matrix reproduce the cell masses, so
//! the duality ∫Pg dm₀ = ∫g dm₀ holds to rounding.
//!
//! Derived operators share the same sparse core:
//!
//! - normalized:  𝒜g = P(g h₀)/h₀ with Ph₀ = h₀, so 𝒜1 = 1;
//! - weighted:    Lg = P(g v)/v with v = e^{kp/2} per floor, so L(h₀/v) = h₀/v
//!   and L*m_w = m_w for dm_w = v dm₀;
//! - twisted:     blocks of the form g ↦ Base^ℓ(e^{zu} g) with a per-block
//!   real function u, which covers R_{it,x̄}, P_z^a and ℒ_z^ω.

mod ly;
mod rpf;
mod sparse;
mod spectral;
mod twisted;

pub use ly::{fit_ly_constants, verify_lasota_yorke, LyConstants, LyReport};
pub use rpf::{pressure_derivatives, rpf_iterate, variance_of_block_sum_mc, RpfTriplet};
pub use sparse::{Csr, CsrBuilder};
pub use spectral::{dense_radius_oracle, spectral_radius, SpectralReport};
pub use twisted::{
    periodic_observable, LatticeClass, PeriodicObservable, TowerObservable, TwistedOp,
};

use crate::error::{Error, Result};
use crate::stats::ksum;
use crate::tower::{Tower, TowerFunction};
use num_complex::Complex64;

/// Base operator selector for twisted blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Plain,
    Normalized,
    Weighted,
}

/// A tower together with its sparse transfer matrix, invariant density and
/// the derived weights. All operator applications go through this.
#[derive(Debug, Clone)]
pub struct TransferOps {
    pub tower: Tower,
    pub p: Csr,
    /// invariant density h₀ (Ph₀ = h₀, ∫h₀ dm₀ = 1)
    pub h0: Vec<f64>,
    /// residual of the power iteration that produced h₀
    pub h0_residual: f64,
    /// per-cell weight v (constant per floor)
    pub v_cell: Vec<f64>,
    /// μ-mass per cell: h₀ · m₀
    pub mu: Vec<f64>,
    /// weighted cell masses: v · m₀
    pub m_w: Vec<f64>,
}

/// Build the Ulam matrix of P for a tower.
pub fn build_p_matrix(tower: &Tower) -> Csr {
    let n = tower.n_cells();
    let g = tower.grid_per_cell();
    let mut b = CsrBuilder::new(n, n);
    // floors k >= 1 pull the value from the floor below
    for (i, cell) in tower.cells.iter().enumerate() {
        if cell.floor >= 1 {
            let below = tower.cell_at(cell.branch, cell.floor - 1, cell.slot);
            b.push(i, below, 1.0);
        }
    }
    // base rows: overlap masses of branch-top images with base cells
    for (j, br) in tower.spec.branches.iter().enumerate() {
        let top = br.return_time - 1;
        let w_j = br.base_mass;
        for s in 0..g {
            let c = tower.cell_at(j, top, s);
            let (u0, u1) = (tower.cells[c].u0, tower.cells[c].u1);
            let x_lo = tower.branch_map(j, u0);
            let x_hi = tower.branch_map(j, u1);
            for (jj, target) in tower.spec.branches.iter().enumerate() {
                let off = tower.branch_offset[jj];
                let w_t = target.base_mass;
                for st in 0..g {
                    let t0 = off + w_t * st as f64 / g as f64;
                    let t1 = off + w_t * (st + 1) as f64 / g as f64;
                    if t1 <= x_lo || t0 >= x_hi {
                        continue;
                    }
                    // pull the overlap back to branch-local u of the source
                    let a = if t0 <= x_lo {
                        u0
                    } else {
                        tower.branch_map_inv(j, t0)
                    };
                    let bmax = if t1 >= x_hi {
                        u1
                    } else {
                        tower.branch_map_inv(j, t1)
                    };
                    if bmax <= a {
                        continue;
                    }
                    let overlap_mass = w_j * (bmax - a) * tower.base_scale;
                    let i = tower.cell_at(jj, 0, st);
                    b.push(i, c, overlap_mass / tower.cells[i].mass);
                }
            }
        }
    }
    b.build()
}

/// Power-iterate the discretized P to the invariant density h₀ with
/// ‖Ph₀ − h₀‖_∞ ≤ tol, normalized to ∫h₀ dm₀ = 1.
pub fn invariant_density(
    tower: &Tower,
    p: &Csr,
    tol: f64,
    max_iter: usize,
) -> Result<(TowerFunction<f64>, f64, usize)> {
    let mut h = vec![1.0; tower.n_cells()];
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let ph = p.apply(&h);
        residual = ph
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let mass = tower.integrate(&ph);
        h = ph.iter().map(|x| x / mass).collect();
        if residual <= tol {
            return Ok((TowerFunction::new(h), residual, it + 1));
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

impl TransferOps {
    /// Build the operator stack for a tower; the invariant density is
    /// iterated to `tol` (at most `max_iter` steps).
    pub fn new(tower: Tower, tol: f64, max_iter: usize) -> Result<Self> {
        let p = build_p_matrix(&tower);
        let (h0f, res, _) = invariant_density(&tower, &p, tol, max_iter)?;
        let h0 = h0f.values;
        let v_cell: Vec<f64> = (0..tower.n_cells()).map(|i| tower.v_at(i)).collect();
        let mu: Vec<f64> = h0
            .iter()
            .zip(&tower.cells)
            .map(|(h, c)| h * c.mass)
            .collect();
        let m_w: Vec<f64> = v_cell
            .iter()
            .zip(&tower.cells)
            .map(|(v, c)| v * c.mass)
            .collect();
        Ok(Self {
            tower,
            p,
            h0,
            h0_residual: res,
            v_cell,
            mu,
            m_w,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.tower.n_cells()
    }

    /// One application of the chosen base operator to a real function.
    pub fn apply_base(&self, kind: BaseKind, g: &[f64]) -> Vec<f64> {
        match kind {
            BaseKind::Plain => self.p.apply(g),
            BaseKind::Normalized => {
                let gh: Vec<f64> = g.iter().zip(&self.h0).map(|(a, b)| a * b).collect();
                self.p
                    .apply(&gh)
                    .iter()
                    .zip(&self.h0)
                    .map(|(a, b)| a / b)
                    .collect()
            }
            BaseKind::Weighted => {
                let gv: Vec<f64> = g.iter().zip(&self.v_cell).map(|(a, b)| a * b).collect();
                self.p
                    .apply(&gv)
                    .iter()
                    .zip(&self.v_cell)
                    .map(|(a, b)| a / b)
                    .collect()
            }
        }
    }

    /// Complex variant of `apply_base`.
    pub fn apply_base_complex(&self, kind: BaseKind, g: &[Complex64]) -> Vec<Complex64> {
        match kind {
            BaseKind::Plain => self.p.apply_complex(g),
            BaseKind::Normalized => {
                let gh: Vec<Complex64> = g.iter().zip(&self.h0).map(|(a, &b)| a * b).collect();
                self.p
                    .apply_complex(&gh)
                    .iter()
                    .zip(&self.h0)
                    .map(|(a, &b)| a / b)
                    .collect()
            }
            BaseKind::Weighted => {
                let gv: Vec<Complex64> = g.iter().zip(&self.v_cell).map(|(a, &b)| a * b).collect();
                self.p
                    .apply_complex(&gv)
                    .iter()
                    .zip(&self.v_cell)
                    .map(|(a, &b)| a / b)
                    .collect()
            }
        }
    }

    /// ∫ g dm₀.
    pub fn integral_m0(&self, g: &[f64]) -> f64 {
        self.tower.integrate(g)
    }

    /// ∫ g dμ with μ = h₀ dm₀.
    pub fn integral_mu(&self, g: &[f64]) -> f64 {
        ksum(g.iter().zip(&self.mu).map(|(a, b)| a * b))
    }

    /// ∫ g dm_w with dm_w = v dm₀.
    pub fn integral_mw(&self, g: &[f64]) -> f64 {
        ksum(g.iter().zip(&self.m_w).map(|(a, b)| a * b))
    }

    pub fn integral_mw_complex(&self, g: &[Complex64]) -> Complex64 {
        let re = ksum(g.iter().zip(&self.m_w).map(|(a, b)| a.re * b));
        let im = ksum(g.iter().zip(&self.m_w).map(|(a, b)| a.im * b));
        Complex64::new(re, im)
    }

    /// Weighted norms (‖·‖_s, ‖·‖_h, ‖·‖_W) of a grid function.
    pub fn weighted_norms(&self, g: &TowerFunction<f64>) -> (f64, f64, f64) {
        let n = g.seminorms(&self.tower);
        (n.norm_s, n.norm_h, n.norm_s + n.norm_h)
    }

    pub fn weighted_norms_complex(&self, g: &TowerFunction<Complex64>) -> (f64, f64, f64) {
        let n = g.seminorms(&self.tower);
        (n.norm_s, n.norm_h, n.norm_s + n.norm_h)
    }

    /// h = h₀/v, the fixed function of the weighted operator.
    pub fn h_weighted(&self) -> Vec<f64> {
        self.h0
            .iter()
            .zip(&self.v_cell)
            .map(|(h, v)| h / v)
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod test_towers {
    use crate::tower::{build_tower, BranchSpec, Tower, TowerSpec};

    /// The 2-branch affine tower used throughout the verification suites.
    pub fn golden_tower(grid: usize) -> Tower {
        build_tower(&TowerSpec {
            branches: vec![
                BranchSpec {
                    return_time: 1,
                    base_mass: 0.5,
                    distortion: 0.0,
                },
                BranchSpec {
                    return_time: 2,
                    base_mass: 0.5,
                    distortion: 0.0,
                },
            ],
            metric_base: 0.5,
            tail_constants: None,
            grid_per_cell: grid,
        })
        .unwrap()
    }
}
