//! Piecewise-constant grid functions on a tower, real or complex, with the
//! weighted seminorms used by the operator theory:
//!
//! ```text
//! ‖g‖_s = sup_k v_k⁻¹ ‖g·1_{Δ_k}‖_∞        (weighted sup)
//! ‖g‖_h = sup_k v_k⁻¹ |g|_{β,Δ_k}           (weighted Lipschitz)
//! ‖g‖_W = ‖g‖_s + ‖g‖_h
//! ```
//!
//! The per-floor Lipschitz constant |g|_{β,Δ_k} is approximated on the grid
//! by the maximum difference between adjacent cells divided by their d_U
//! distance; this is a lower bound of the true constant of a continuum
//! function, and exact for the piecewise-constant class itself restricted to
//! grid points.

use super::Tower;
use num_complex::Complex64;
use std::cell::OnceCell;

/// Cached seminorms of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormCache {
    pub sup: f64,
    pub lip: f64,
    pub norm_s: f64,
    pub norm_h: f64,
}

/// A grid function: one scalar per tower cell.
#[derive(Debug, Clone)]
pub struct TowerFunction<T> {
    pub values: Vec<T>,
    cache: OnceCell<SeminormCache>,
}

pub trait GridScalar: Copy {
    fn abs_val(self) -> f64;
    fn sub_abs(self, other: Self) -> f64;
}

impl GridScalar for f64 {
    fn abs_val(self) -> f64 {
        self.abs()
    }
    fn sub_abs(self, other: Self) -> f64 {
        (self - other).abs()
    }
}

impl GridScalar for Complex64 {
    fn abs_val(self) -> f64 {
        self.norm()
    }
    fn sub_abs(self, other: Self) -> f64 {
        (self - other).norm()
    }
}

impl<T: GridScalar> TowerFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self {
            values,
            cache: OnceCell::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Seminorms over the given tower grid (cached after first computation).
    pub fn seminorms(&self, tower: &Tower) -> SeminormCache {
        *self.cache.get_or_init(|| compute_seminorms(tower, &self.values))
    }

    /// Recompute without the cache; the cache must agree.
    pub fn seminorms_fresh(&self, tower: &Tower) -> SeminormCache {
        compute_seminorms(tower, &self.values)
    }
}

fn compute_seminorms<T: GridScalar>(tower: &Tower, values: &[T]) -> SeminormCache {
    assert_eq!(values.len(), tower.n_cells(), "grid mismatch");
    let mut sup = 0.0f64;
    let mut norm_s = 0.0f64;
    for (i, v) in values.iter().enumerate() {
        let a = v.abs_val();
        sup = sup.max(a);
        norm_s = norm_s.max(a / tower.v_at(i));
    }
    let mut lip = 0.0f64;
    let mut norm_h = 0.0f64;
    for (i0, i1, d) in tower.adjacent_pairs() {
        if d > 0.0 {
            let slope = values[i0].sub_abs(values[i1]) / d;
            lip = lip.max(slope);
            norm_h = norm_h.max(slope / tower.v_at(i0));
        }
    }
    SeminormCache {
        sup,
        lip,
        norm_s,
        norm_h,
    }
}

pub type RealTf = TowerFunction<f64>;
pub type ComplexTf = TowerFunction<Complex64>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::{build_tower, BranchSpec, TowerSpec};

    fn tower() -> Tower {
        build_tower(&TowerSpec {
            branches: vec![
                BranchSpec {
                    return_time: 1,
                    base_mass: 0.5,
                    distortion: 0.0,
                },
                BranchSpec {
                    return_time: 3,
                    base_mass: 0.5,
                    distortion: 0.0,
                },
            ],
            metric_base: 0.5,
            tail_constants: None,
            grid_per_cell: 8,
        })
        .unwrap()
    }

    #[test]
    fn weight_function_has_unit_s_norm_and_zero_h() {
        let t = tower();
        let v: Vec<f64> = (0..t.n_cells()).map(|i| t.v_at(i)).collect();
        let f = TowerFunction::new(v);
        let n = f.seminorms(&t);
        assert!((n.norm_s - 1.0).abs() < 1e-14);
        assert_eq!(n.norm_h, 0.0, "v is constant per floor");
    }

    #[test]
    fn single_floor_support_scales_by_weight() {
        let t = tower();
        let mut vals = vec![0.0; t.n_cells()];
        for (i, c) in t.cells.iter().enumerate() {
            if c.branch == 1 && c.floor == 2 {
                vals[i] = 1.0;
            }
        }
        let f = TowerFunction::new(vals);
        let n = f.seminorms(&t);
        let expected = (-(2.0) * t.tail_p / 2.0).exp();
        assert!((n.norm_s - expected).abs() < 1e-14);
    }

    #[test]
    fn norms_are_homogeneous_and_cache_consistent() {
        let t = tower();
        let vals: Vec<f64> = (0..t.n_cells()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let f = TowerFunction::new(vals.clone());
        let doubled = TowerFunction::new(vals.iter().map(|v| 2.0 * v).collect());
        let n1 = f.seminorms(&t);
        let n2 = doubled.seminorms(&t);
        assert!((n2.norm_s - 2.0 * n1.norm_s).abs() < 1e-12);
        assert!((n2.norm_h - 2.0 * n1.norm_h).abs() < 1e-12);
        assert!(((n2.norm_s + n2.norm_h) - 2.0 * (n1.norm_s + n1.norm_h)).abs() < 1e-12);
        assert_eq!(f.seminorms(&t), f.seminorms_fresh(&t));
    }
}
