//! Compressed sparse rows with real entries, applied to real or complex
//! vectors. The transfer-operator matrices built here are real; twists enter
//! as diagonal complex phase multiplications outside the matrix.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

pub struct CsrBuilder {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            rows: vec![Vec::new(); n_rows],
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.rows[row].push((col, value));
        }
    }

    pub fn build(mut self) -> Csr {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut self.rows {
            row.sort_by_key(|(c, _)| *c);
            // merge duplicate columns
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl Csr {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "dimension mismatch");
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[i] * x[self.col_idx[i]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n_cols, "dimension mismatch");
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_rows];
        for r in 0..self.n_rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.col_idx[i]] * self.values[i];
            }
            y[r] = acc;
        }
        y
    }

    /// y = Aᵀ x (used by dual/functional iteration).
    pub fn apply_transpose_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n_rows, "dimension mismatch");
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_cols];
        for r in 0..self.n_rows {
            let xr = x[r];
            if xr == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[i]] += xr * self.values[i];
            }
        }
        y
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_and_transpose_agree_with_dense() {
        let mut b = CsrBuilder::new(3, 3);
        b.push(0, 0, 2.0);
        b.push(0, 2, 1.0);
        b.push(1, 1, -1.0);
        b.push(2, 0, 0.5);
        b.push(2, 2, 3.0);
        let m = b.build();
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(m.apply(&x), vec![5.0, -2.0, 9.5]);
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, -v)).collect();
        let yt = m.apply_transpose_complex(&xc);
        // dense transpose: columns of m dotted with x
        assert!((yt[0] - Complex64::new(2.0 + 1.5, -(2.0 + 1.5))).norm() < 1e-14);
        assert!((yt[1] - Complex64::new(-2.0, 2.0)).norm() < 1e-14);
        assert!((yt[2] - Complex64::new(1.0 + 9.0, -(1.0 + 9.0))).norm() < 1e-14);
    }

    #[test]
    fn duplicate_entries_merge() {
        let mut b = CsrBuilder::new(1, 2);
        b.push(0, 1, 1.0);
        b.push(0, 1, 2.5);
        let m = b.build();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.apply(&[0.0, 1.0]), vec![3.5]);
    }
}
