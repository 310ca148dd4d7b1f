//! Compressed sparse row matrices over complex numbers.
//!
//! Only what operator assembly and Krylov iterations need: triplet
//! construction, Kronecker products, linear combinations, products, adjoints
//! and matrix-vector products.

use nalgebra::DMatrix;

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut indices = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        for (i, &v) in diag.iter().enumerate() {
            if v != C64::new(0.0, 0.0) {
                indices.push(i);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr,
            indices,
            values,
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_counts = vec![0usize; nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] = indptr[r] + row_counts[r];
        }
        let mut m = CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        };
        m.prune(0.0);
        m
    }

    pub fn from_dense(d: &DMatrix<C64>) -> Self {
        let mut t = Vec::new();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let v = d[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Drops stored entries with magnitude ≤ `threshold`.
    pub fn prune(&mut self, threshold: f64) {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut w = 0;
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k].norm() > threshold {
                    self.indices[w] = self.indices[k];
                    self.values[w] = self.values[k];
                    w += 1;
                }
            }
            indptr.push(w);
        }
        self.indices.truncate(w);
        self.values.truncate(w);
        self.indptr = indptr;
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&c) {
            Ok(pos) => self.values[self.indptr[r] + pos],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Iterates stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = self.clone();
        for v in m.values.iter_mut() {
            *v *= s;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    /// Σ coefficients[i] · matrices[i]; all operands must share a shape.
    pub fn linear_combination(terms: &[(C64, &CsrMatrix)]) -> Self {
        let (nrows, ncols) = terms.first().map(|(_, m)| (m.nrows, m.ncols)).unwrap_or((0, 0));
        let mut t = Vec::with_capacity(terms.iter().map(|(_, m)| m.nnz()).sum());
        for (s, m) in terms {
            assert!(m.nrows == nrows && m.ncols == ncols, "shape mismatch in linear combination");
            t.extend(m.triplets().map(|(r, c, v)| (r, c, v * s)));
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        let one = C64::new(1.0, 0.0);
        Self::linear_combination(&[(one, self), (one, other)])
    }

    /// Sparse-sparse product.
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let mut t = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols = Vec::new();
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.values[k];
                let mid = self.indices[k];
                for q in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[q];
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * other.values[q];
                }
            }
            for &c in &cols {
                t.push((r, c, acc[c]));
                acc[c] = C64::new(0.0, 0.0);
                touched[c] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    /// Kronecker product self ⊗ other.
    pub fn kron(&self, other: &CsrMatrix) -> Self {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() * other.nnz());
        let mut values = Vec::with_capacity(self.nnz() * other.nnz());
        indptr.push(0);
        for ra in 0..self.nrows {
            for rb in 0..other.nrows {
                for ka in self.indptr[ra]..self.indptr[ra + 1] {
                    let ca = self.indices[ka];
                    let va = self.values[ka];
                    for kb in other.indptr[rb]..other.indptr[rb + 1] {
                        indices.push(ca * other.ncols + other.indices[kb]);
                        values.push(va * other.values[kb]);
                    }
                }
                indptr.push(indices.len());
            }
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// y = A x.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *out = s;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.values[self.indptr[r]..self.indptr[r + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// ‖A − A†‖_max.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst
    }

    pub fn trace(&self) -> C64 {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(2, 3, vec![(0, 0, c(1.0, 0.0)), (0, 2, c(0.0, 2.0)), (1, 1, c(3.0, -1.0))])
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(0.0, 0.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 0.0));
    }

    #[test]
    fn dense_round_trip_and_adjoint() {
        let m = sample();
        assert_eq!(CsrMatrix::from_dense(&m.to_dense()), m);
        assert_eq!(m.adjoint().to_dense(), m.to_dense().adjoint());
    }

    #[test]
    fn kron_matches_dense() {
        let a = sample();
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 1.0)), (1, 0, c(2.0, 0.0)), (1, 1, c(-1.0, 0.0))]);
        let k = a.kron(&b).to_dense();
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..4 {
            for j in 0..6 {
                assert_eq!(k[(i, j)], da[(i / 2, j / 2)] * db[(i % 2, j % 2)]);
            }
        }
    }

    #[test]
    fn matmul_and_matvec_match_dense() {
        let a = sample();
        let b = a.adjoint();
        let p = a.matmul(&b).to_dense();
        let d = a.to_dense() * b.to_dense();
        assert!((p - d).norm() < 1e-14);
        let x = vec![c(1.0, 0.5), c(-2.0, 0.0), c(0.0, 1.0)];
        let y = a.matvec(&x);
        let dy = a.to_dense() * nalgebra::DVector::from_vec(x);
        for i in 0..2 {
            assert!((y[i] - dy[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn hermiticity_error_detects_asymmetry() {
        let h = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))]);
        assert_eq!(h.hermiticity_error(), 0.0);
        let n = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(0.0, 1.0))]);
        assert_eq!(n.hermiticity_error(), 1.0);
    }
}
