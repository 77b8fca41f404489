//! Young towers over an interval base.
//!
//! The base Δ₀ is [0,1), partitioned into branch intervals Δ₀^j of ν₀-mass
//! w_j. Branch j carries a return time R_j and a monotone bijection of its
//! interval onto the whole base (affine by default, optionally with a smooth
//! quadratic distortion). Floor k holds a copy Δ_k^j of every branch with
//! R_j > k, and the tower map lifts points one floor per step until the top
//! floor, where the branch map sends them back to the base:
//!
//! ```text
//! F(x, k) = (x, k+1)      if R(x) > k+1
//! F(x, k) = (f₀(x), 0)    if R(x) = k+1
//! ```
//!
//! The lifted measure m₀ assigns each floor copy the ν₀-mass of its branch,
//! normalized so m₀(Δ) = 1. Functions are discretized as piecewise constants
//! on a uniform grid per floor cell. Two separation metrics are provided:
//! d_U(x,y) = β^{s_U} counts tower steps until the orbits split across the
//! cells {Δ_k^j}, and d_NU counts base returns; points on distinct floors are
//! at d_NU = 1.

mod function;

pub use function::{SeminormCache, TowerFunction};

use crate::error::{Error, Result};
use crate::stats::ksum;
use serde::{Deserialize, Serialize};

/// One branch of the tower base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSpec {
    /// Return time R_j >= 1.
    pub return_time: usize,
    /// ν₀-mass of the branch interval; masses must sum to 1.
    pub base_mass: f64,
    /// Quadratic distortion d of the branch map u -> u + d·u(1-u); 0 = affine.
    #[serde(default)]
    pub distortion: f64,
}

/// Declarative description of a tower.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerSpec {
    pub branches: Vec<BranchSpec>,
    /// Base of the separation metrics, β ∈ (0,1).
    pub metric_base: f64,
    /// Optional (p, q) for the exponential tail bound m₀{R>n} ≤ q e^{-pn}.
    /// When absent, p is fitted from the actual tail and q set accordingly.
    #[serde(default)]
    pub tail_constants: Option<(f64, f64)>,
    /// Grid cells per floor cell.
    pub grid_per_cell: usize,
}

/// A point of the tower: branch, floor, and branch-local coordinate u ∈ [0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub branch: usize,
    pub floor: usize,
    pub u: f64,
}

/// One grid cell: a sub-interval of a floor copy of a branch.
#[derive(Debug, Clone)]
pub struct Cell {
    pub branch: usize,
    pub floor: usize,
    /// index of the cell within its branch column
    pub slot: usize,
    /// branch-local coordinate range [u0, u1)
    pub u0: f64,
    pub u1: f64,
    /// m₀-mass of the cell
    pub mass: f64,
}

/// A built tower: enumerated floor cells, measures, metrics and the map.
#[derive(Debug, Clone)]
pub struct Tower {
    pub spec: TowerSpec,
    pub cells: Vec<Cell>,
    /// cell index by (branch, floor, slot)
    index: Vec<Vec<usize>>, // index[branch][floor * g + slot]
    /// cumulative base offsets l_j of the branch intervals
    pub branch_offset: Vec<f64>,
    /// normalization 1/Σ_j R_j w_j applied to ν₀ when lifting
    pub base_scale: f64,
    /// fitted or supplied tail constants
    pub tail_p: f64,
    pub tail_q: f64,
    /// weight v_k = e^{k p / 2} per floor
    pub v: Vec<f64>,
    max_return: usize,
}

impl TowerSpec {
    fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::Validation("tower needs at least one branch".into()));
        }
        if !(0.0..1.0).contains(&self.metric_base) || self.metric_base <= 0.0 {
            return Err(Error::Validation("metric_base must lie in (0,1)".into()));
        }
        if self.grid_per_cell == 0 {
            return Err(Error::Validation("grid_per_cell must be >= 1".into()));
        }
        let mass: f64 = ksum(self.branches.iter().map(|b| b.base_mass));
        if (mass - 1.0).abs() > 1e-12 || self.branches.iter().any(|b| b.base_mass <= 0.0) {
            return Err(Error::Validation(format!(
                "branch masses must be positive and sum to 1 (got {mass})"
            )));
        }
        if self.branches.iter().any(|b| b.return_time == 0) {
            return Err(Error::Validation("return times must be >= 1".into()));
        }
        if self.branches.iter().any(|b| b.distortion.abs() >= 1.0) {
            return Err(Error::Validation("|distortion| must be < 1".into()));
        }
        Ok(())
    }
}

/// Build a tower from its spec, checking aperiodicity and tail bounds.
pub fn build_tower(spec: &TowerSpec) -> Result<Tower> {
    spec.validate()?;
    let g = spec.grid_per_cell;
    let gcd = spec
        .branches
        .iter()
        .fold(0u64, |acc, b| gcd(acc, b.return_time as u64));
    if gcd != 1 {
        return Err(Error::Aperiodicity(gcd));
    }

    let total_mass: f64 = ksum(spec.branches.iter().map(|b| b.base_mass * b.return_time as f64));
    let base_scale = 1.0 / total_mass;

    let mut branch_offset = Vec::with_capacity(spec.branches.len());
    let mut acc = 0.0;
    for b in &spec.branches {
        branch_offset.push(acc);
        acc += b.base_mass;
    }

    let max_return = spec.branches.iter().map(|b| b.return_time).max().unwrap();

    // tail m₀{R > n} over the whole tower
    let tail = |n: usize| -> f64 {
        ksum(
            spec.branches
                .iter()
                .filter(|b| b.return_time > n)
                .map(|b| b.base_mass * b.return_time as f64 * base_scale),
        )
    };
    let (tail_p, tail_q) = match spec.tail_constants {
        Some((p, q)) => {
            for n in 0..=max_return {
                let mass = tail(n);
                let bound = q * (-p * n as f64).exp();
                if mass > bound + 1e-12 {
                    return Err(Error::TailBound { n, mass, bound });
                }
            }
            (p, q)
        }
        None => {
            // smallest q with q e^{-pn} >= tail(n) for the fitted p; fit p as
            // the tightest exponential rate the finite tail supports
            let mut p = f64::INFINITY;
            for n in 1..=max_return {
                let t = tail(n);
                if t > 0.0 {
                    p = p.min(-(t.ln()) / n as f64);
                }
            }
            if !p.is_finite() {
                p = 1.0; // single-branch R=1 tower: empty tail beyond n=0
            }
            let q = (0..=max_return)
                .map(|n| tail(n) * (p * n as f64).exp())
                .fold(1.0f64, f64::max);
            (p, q)
        }
    };

    let mut cells = Vec::new();
    let mut index = Vec::with_capacity(spec.branches.len());
    for (j, b) in spec.branches.iter().enumerate() {
        let mut branch_index = Vec::with_capacity(b.return_time * g);
        let cell_mass = b.base_mass * base_scale / g as f64;
        for k in 0..b.return_time {
            for slot in 0..g {
                branch_index.push(cells.len());
                cells.push(Cell {
                    branch: j,
                    floor: k,
                    slot,
                    u0: slot as f64 / g as f64,
                    u1: (slot + 1) as f64 / g as f64,
                    mass: cell_mass,
                });
            }
        }
        index.push(branch_index);
    }

    let v = (0..max_return)
        .map(|k| ((k as f64) * tail_p / 2.0).exp())
        .collect();

    Ok(Tower {
        spec: spec.clone(),
        cells,
        index,
        branch_offset,
        base_scale,
        tail_p,
        tail_q,
        v,
        max_return,
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Tower {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_branches(&self) -> usize {
        self.spec.branches.len()
    }

    pub fn max_return(&self) -> usize {
        self.max_return
    }

    pub fn grid_per_cell(&self) -> usize {
        self.spec.grid_per_cell
    }

    /// Cell index of (branch, floor, slot).
    pub fn cell_at(&self, branch: usize, floor: usize, slot: usize) -> usize {
        self.index[branch][floor * self.spec.grid_per_cell + slot]
    }

    /// Cell containing a point.
    pub fn locate(&self, p: &Point) -> Result<usize> {
        let b = self
            .spec
            .branches
            .get(p.branch)
            .ok_or_else(|| Error::Validation(format!("branch {} out of range", p.branch)))?;
        if p.floor >= b.return_time {
            return Err(Error::Validation(format!(
                "floor {} invalid for branch {} with R={}",
                p.floor, p.branch, b.return_time
            )));
        }
        if !(0.0..1.0).contains(&p.u) {
            return Err(Error::Validation(format!("coordinate {} outside [0,1)", p.u)));
        }
        let slot = ((p.u * self.spec.grid_per_cell as f64) as usize)
            .min(self.spec.grid_per_cell - 1);
        Ok(self.cell_at(p.branch, p.floor, slot))
    }

    /// Center point of a cell.
    pub fn cell_center(&self, idx: usize) -> Point {
        let c = &self.cells[idx];
        Point {
            branch: c.branch,
            floor: c.floor,
            u: 0.5 * (c.u0 + c.u1),
        }
    }

    /// Branch map value in base coordinates: f₀ restricted to branch j,
    /// evaluated at branch-local u.
    pub fn branch_map(&self, branch: usize, u: f64) -> f64 {
        let d = self.spec.branches[branch].distortion;
        u + d * u * (1.0 - u)
    }

    /// Inverse of the branch map: branch-local u with branch_map(u) = x.
    pub fn branch_map_inv(&self, branch: usize, x: f64) -> f64 {
        let d = self.spec.branches[branch].distortion;
        if d == 0.0 {
            return x;
        }
        // u + d u(1-u) = x  <=>  d u² - (1+d) u + x = 0
        let b = 1.0 + d;
        let disc = (b * b - 4.0 * d * x).max(0.0).sqrt();
        // the monotone root in [0,1], in cancellation-free form
        let u = (2.0 * x) / (b + disc);
        u.clamp(0.0, 1.0)
    }

    /// Derivative of the branch map in branch-local coordinates.
    pub fn branch_map_deriv(&self, branch: usize, u: f64) -> f64 {
        let d = self.spec.branches[branch].distortion;
        1.0 + d * (1.0 - 2.0 * u)
    }

    /// Jacobian of the return map F^R w.r.t. m₀ at branch-local u: the branch
    /// interval of mass w_j expands onto the unit base.
    pub fn return_jacobian(&self, branch: usize, u: f64) -> f64 {
        self.branch_map_deriv(branch, u) / self.spec.branches[branch].base_mass
    }

    /// Locate the branch containing base coordinate x ∈ [0,1).
    pub fn branch_of_base(&self, x: f64) -> usize {
        let mut j = 0;
        for (i, &off) in self.branch_offset.iter().enumerate() {
            if x >= off {
                j = i;
            } else {
                break;
            }
        }
        j
    }

    /// The tower map F.
    pub fn tower_map(&self, p: &Point) -> Result<Point> {
        self.locate(p)?; // validates
        let r = self.spec.branches[p.branch].return_time;
        if p.floor + 1 < r {
            return Ok(Point {
                branch: p.branch,
                floor: p.floor + 1,
                u: p.u,
            });
        }
        // return to the base through the branch map
        let x = self.branch_map(p.branch, p.u);
        let j = self.branch_of_base(x);
        let w = self.spec.branches[j].base_mass;
        let u = ((x - self.branch_offset[j]) / w).clamp(0.0, 1.0 - 1e-15);
        Ok(Point {
            branch: j,
            floor: 0,
            u,
        })
    }

    /// Greatest n such that the orbits of x and y stay in the same floor cell
    /// Δ_k^j for all p < n, capped at `cap`. Returns `cap` for x = y-like
    /// pairs that never separate within the cap.
    pub fn separation_u(&self, x: &Point, y: &Point, cap: usize) -> usize {
        if x == y {
            return cap;
        }
        let mut a = *x;
        let mut b = *y;
        for n in 0..cap {
            if a.branch != b.branch || a.floor != b.floor {
                return n;
            }
            a = match self.tower_map(&a) {
                Ok(p) => p,
                Err(_) => return n,
            };
            b = match self.tower_map(&b) {
                Ok(p) => p,
                Err(_) => return n,
            };
        }
        cap
    }

    /// Greatest n such that the base return orbits stay in the same branch
    /// interval for all p < n; 0 when the points sit on different floors.
    pub fn separation_nu(&self, x: &Point, y: &Point, cap: usize) -> usize {
        if x == y {
            return cap;
        }
        if x.floor != y.floor {
            return 0;
        }
        let mut a = *x;
        let mut b = *y;
        // project to the base copies
        a.floor = 0;
        b.floor = 0;
        for n in 0..cap {
            if a.branch != b.branch {
                return n;
            }
            a = self.return_map(&a);
            b = self.return_map(&b);
        }
        cap
    }

    /// One application of the return map f₀ on base points.
    fn return_map(&self, p: &Point) -> Point {
        let x = self.branch_map(p.branch, p.u);
        let j = self.branch_of_base(x);
        let w = self.spec.branches[j].base_mass;
        Point {
            branch: j,
            floor: 0,
            u: ((x - self.branch_offset[j]) / w).clamp(0.0, 1.0 - 1e-15),
        }
    }

    const SEP_CAP: usize = 400;

    /// d_U(x, y) = β^{s_U}.
    pub fn d_u(&self, x: &Point, y: &Point) -> f64 {
        let s = self.separation_u(x, y, Self::SEP_CAP);
        if s >= Self::SEP_CAP && x == y {
            0.0
        } else {
            self.spec.metric_base.powi(s as i32)
        }
    }

    /// d_NU(x, y) = β^{s_NU}.
    pub fn d_nu(&self, x: &Point, y: &Point) -> f64 {
        let s = self.separation_nu(x, y, Self::SEP_CAP);
        if s >= Self::SEP_CAP && x == y {
            0.0
        } else {
            self.spec.metric_base.powi(s as i32)
        }
    }

    /// Full metric report (s_U, d_U, s_NU, d_NU) for a pair of points.
    pub fn separation_and_metrics(&self, x: &Point, y: &Point) -> (usize, f64, usize, f64) {
        (
            self.separation_u(x, y, Self::SEP_CAP),
            self.d_u(x, y),
            self.separation_nu(x, y, Self::SEP_CAP),
            self.d_nu(x, y),
        )
    }

    /// m₀-mass of the whole tower (1 after normalization).
    pub fn total_mass(&self) -> f64 {
        ksum(self.cells.iter().map(|c| c.mass))
    }

    /// ∫ f dm₀ for a grid function.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        ksum(values.iter().zip(&self.cells).map(|(v, c)| v * c.mass))
    }

    /// Weight v at a cell's floor.
    pub fn v_at(&self, cell: usize) -> f64 {
        self.v[self.cells[cell].floor]
    }

    /// Empirical tail m₀{R > n}.
    pub fn tail_mass(&self, n: usize) -> f64 {
        ksum(
            self.spec
                .branches
                .iter()
                .filter(|b| b.return_time > n)
                .map(|b| b.base_mass * b.return_time as f64 * self.base_scale),
        )
    }

    /// Adjacent same-floor cell pairs (i, i+1 within a branch column) with
    /// their d_U distance between cell centers; used by grid seminorms.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize, f64)> {
        let g = self.spec.grid_per_cell;
        let mut pairs = Vec::new();
        for (j, b) in self.spec.branches.iter().enumerate() {
            for k in 0..b.return_time {
                for s in 0..g.saturating_sub(1) {
                    let i0 = self.cell_at(j, k, s);
                    let i1 = self.cell_at(j, k, s + 1);
                    let d = self.d_u(&self.cell_center(i0), &self.cell_center(i1));
                    pairs.push((i0, i1, d));
                }
            }
        }
        pairs
    }

    /// Like `adjacent_pairs` but measured in d_NU.
    pub fn adjacent_pairs_nu(&self) -> Vec<(usize, usize, f64)> {
        let g = self.spec.grid_per_cell;
        let mut pairs = Vec::new();
        for (j, b) in self.spec.branches.iter().enumerate() {
            for k in 0..b.return_time {
                for s in 0..g.saturating_sub(1) {
                    let i0 = self.cell_at(j, k, s);
                    let i1 = self.cell_at(j, k, s + 1);
                    let d = self.d_nu(&self.cell_center(i0), &self.cell_center(i1));
                    pairs.push((i0, i1, d));
                }
            }
        }
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn two_branch_spec() -> TowerSpec {
        TowerSpec {
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
            grid_per_cell: 16,
        }
    }

    #[test]
    fn single_branch_tower_is_base_only() {
        let spec = TowerSpec {
            branches: vec![BranchSpec {
                return_time: 1,
                base_mass: 1.0,
                distortion: 0.0,
            }],
            metric_base: 0.5,
            tail_constants: None,
            grid_per_cell: 8,
        };
        let tower = build_tower(&spec).unwrap();
        assert!(tower.cells.iter().all(|c| c.floor == 0));
        // F = f₀: a base point returns immediately
        let p = Point {
            branch: 0,
            floor: 0,
            u: 0.3,
        };
        let q = tower.tower_map(&p).unwrap();
        assert_eq!(q.floor, 0);
    }

    #[test]
    fn floor_cell_count_matches_return_times() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        // R ∈ {1,2}: floor cells are Δ₀¹, Δ₀², Δ₁² -> 3 cells of the grid
        let distinct: std::collections::BTreeSet<(usize, usize)> =
            tower.cells.iter().map(|c| (c.branch, c.floor)).collect();
        assert_eq!(distinct.len(), 3);
        assert_eq!(tower.n_cells(), 3 * 16);
    }

    #[test]
    fn gcd_two_is_rejected() {
        let spec = TowerSpec {
            branches: vec![
                BranchSpec {
                    return_time: 2,
                    base_mass: 0.5,
                    distortion: 0.0,
                },
                BranchSpec {
                    return_time: 4,
                    base_mass: 0.5,
                    distortion: 0.0,
                },
            ],
            metric_base: 0.5,
            tail_constants: None,
            grid_per_cell: 4,
        };
        assert!(matches!(build_tower(&spec), Err(Error::Aperiodicity(2))));
    }

    #[test]
    fn measure_is_normalized_and_tail_bound_holds() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        assert!((tower.total_mass() - 1.0).abs() < 1e-12);
        for n in 0..=tower.max_return() {
            let mass = tower.tail_mass(n);
            let bound = tower.tail_q * (-tower.tail_p * n as f64).exp();
            assert!(mass <= bound + 1e-12, "n={n} mass={mass} bound={bound}");
        }
    }

    #[test]
    fn explicit_tail_constants_are_validated() {
        let mut spec = two_branch_spec();
        spec.tail_constants = Some((5.0, 1.0)); // way too steep for R=2 mass
        assert!(matches!(build_tower(&spec), Err(Error::TailBound { .. })));
        spec.tail_constants = Some((0.3, 1.0));
        assert!(build_tower(&spec).is_ok());
    }

    #[test]
    fn tower_map_lifts_then_returns() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        let p = Point {
            branch: 1,
            floor: 0,
            u: 0.25,
        };
        // R(branch 1) = 2 > 1: lift
        let q = tower.tower_map(&p).unwrap();
        assert_eq!((q.branch, q.floor), (1, 1));
        assert_eq!(q.u, 0.25);
        // top floor: return via f₀ (affine onto the base)
        let r = tower.tower_map(&q).unwrap();
        assert_eq!(r.floor, 0);
        // base coordinate 0.5 + 0.25·0.5 ... branch map sends u=0.25 to x=0.25
        // which lies in branch 0 = [0, 0.5)
        assert_eq!(r.branch, 0);
        assert!((r.u - 0.5).abs() < 1e-12);
    }

    #[test]
    fn affine_fixed_point_of_r1_branch_is_fixed() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        // branch 0 = [0, 0.5), R = 1, map x -> 2x: fixed point x* = 0 (u = 0)
        let p = Point {
            branch: 0,
            floor: 0,
            u: 0.0,
        };
        let q = tower.tower_map(&p).unwrap();
        assert_eq!(q, p);
    }

    #[test]
    fn invalid_floor_is_an_error() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        let p = Point {
            branch: 0,
            floor: 1,
            u: 0.5,
        };
        assert!(tower.tower_map(&p).is_err());
    }

    #[test]
    fn metrics_basics() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        let x = Point {
            branch: 0,
            floor: 0,
            u: 0.1,
        };
        // identical points: zero distance
        assert_eq!(tower.d_u(&x, &x), 0.0);
        assert_eq!(tower.d_nu(&x, &x), 0.0);
        // different floors: d_NU = 1
        let y = Point {
            branch: 1,
            floor: 1,
            u: 0.1,
        };
        assert_eq!(tower.d_nu(&x, &y), 1.0);
        // d_U <= d_NU on sampled pairs, symmetry
        let pts = [
            Point { branch: 0, floor: 0, u: 0.05 },
            Point { branch: 0, floor: 0, u: 0.07 },
            Point { branch: 1, floor: 0, u: 0.51 },
            Point { branch: 1, floor: 1, u: 0.52 },
            Point { branch: 1, floor: 0, u: 0.97 },
        ];
        for a in &pts {
            for b in &pts {
                let du = tower.d_u(a, b);
                let dnu = tower.d_nu(a, b);
                assert!(du <= dnu + 1e-15, "d_U={} d_NU={}", du, dnu);
                assert_eq!(du.to_bits(), tower.d_u(b, a).to_bits());
                assert_eq!(dnu.to_bits(), tower.d_nu(b, a).to_bits());
            }
        }
    }

    #[test]
    fn du_counts_shared_cylinder_length() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        // points deep inside branch 1 (R=2) that stay together 3 steps:
        // pick u, u' mapping into the same cells for 3 iterates but not 4
        let x = Point { branch: 1, floor: 0, u: 0.30 };
        let y = Point { branch: 1, floor: 0, u: 0.31 };
        let s = tower.separation_u(&x, &y, 100);
        assert_eq!(tower.d_u(&x, &y), 0.5f64.powi(s as i32));
        assert!(s >= 2, "nearby points should share at least the lift step");
    }

    #[test]
    fn ultrametric_triangle_on_sampled_triples() {
        let tower = build_tower(&two_branch_spec()).unwrap();
        let pts: Vec<Point> = (0..12)
            .map(|i| Point {
                branch: i % 2,
                floor: 0,
                u: (i as f64 + 0.37) / 12.5,
            })
            .collect();
        for a in &pts {
            for b in &pts {
                for c in &pts {
                    let ab = tower.d_u(a, b);
                    let bc = tower.d_u(b, c);
                    let ac = tower.d_u(a, c);
                    assert!(ac <= ab.max(bc) + 1e-15, "ultrametric violated");
                }
            }
        }
    }

    #[test]
    fn distorted_branch_map_inverts_exactly() {
        let spec = TowerSpec {
            branches: vec![
                BranchSpec {
                    return_time: 1,
                    base_mass: 0.6,
                    distortion: 0.4,
                },
                BranchSpec {
                    return_time: 2,
                    base_mass: 0.4,
                    distortion: -0.3,
                },
            ],
            metric_base: 0.6,
            tail_constants: None,
            grid_per_cell: 8,
        };
        let tower = build_tower(&spec).unwrap();
        for j in 0..2 {
            for i in 0..50 {
                let u = i as f64 / 50.0;
                let x = tower.branch_map(j, u);
                let back = tower.branch_map_inv(j, x);
                assert!((back - u).abs() < 1e-12, "branch {j} u={u} back={back}");
            }
        }
    }
}
