//! Compressed sparse row matrices over ℂ.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Row-compressed complex matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl Csr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let n = d.len();
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: d.to_vec(),
        }
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let d: Vec<C64> = d.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, trip: &[(usize, usize, C64)]) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(r, c, _) in trip {
            if r >= rows || c >= cols {
                return Err(Error::OutOfRange(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
            counts[r + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut idx = vec![0usize; trip.len()];
        let mut val = vec![ZERO; trip.len()];
        for &(r, c, v) in trip {
            idx[next[r]] = c;
            val[next[r]] = v;
            next[r] += 1;
        }
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data = Vec::with_capacity(trip.len());
        let mut row: Vec<(usize, C64)> = Vec::new();
        for r in 0..rows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (idx[k], val[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = ZERO;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                indices.push(c);
                data.push(v);
            }
            indptr[r + 1] = indices.len();
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            data,
        })
    }

    /// Builds from a dense row-major closure, keeping nonzero entries.
    pub fn from_dense_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                if v != ZERO {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (idx, val) = self.row(r);
        match idx.binary_search(&c) {
            Ok(k) => val[k],
            Err(_) => ZERO,
        }
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, val) = self.row(r);
            idx.iter().zip(val).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols, "matvec input length");
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let (idx, val) = self.row(r);
            *yr = idx.iter().zip(val).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `A* x` without forming the adjoint.
    pub fn adjoint_matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows, "adjoint matvec input length");
        let mut y = vec![ZERO; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                y[c] += v.conj() * xr;
            }
        }
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let trip: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, &trip).expect("indices in range")
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `alpha·A + beta·B` with the same shape.
    pub fn axpby(alpha: C64, a: &Self, beta: C64, b: &Self) -> Result<Self> {
        if a.rows != b.rows || a.cols != b.cols {
            return Err(Error::DimensionMismatch {
                expected: a.rows * a.cols,
                found: b.rows * b.cols,
            });
        }
        let mut indptr = vec![0usize; a.rows + 1];
        let mut indices = Vec::with_capacity(a.nnz() + b.nnz());
        let mut data = Vec::with_capacity(a.nnz() + b.nnz());
        for r in 0..a.rows {
            let (ia, va) = a.row(r);
            let (ib, vb) = b.row(r);
            let (mut p, mut q) = (0, 0);
            while p < ia.len() || q < ib.len() {
                let ca = ia.get(p).copied().unwrap_or(usize::MAX);
                let cb = ib.get(q).copied().unwrap_or(usize::MAX);
                if ca < cb {
                    indices.push(ca);
                    data.push(alpha * va[p]);
                    p += 1;
                } else if cb < ca {
                    indices.push(cb);
                    data.push(beta * vb[q]);
                    q += 1;
                } else {
                    indices.push(ca);
                    data.push(alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            indptr[r + 1] = indices.len();
        }
        Ok(Self {
            rows: a.rows,
            cols: a.cols,
            indptr,
            indices,
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::axpby(C64::new(1.0, 0.0), self, C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::axpby(C64::new(1.0, 0.0), self, C64::new(-1.0, 0.0), other)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut acc = vec![ZERO; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            let (ia, va) = self.row(r);
            for (&k, &a) in ia.iter().zip(va) {
                let (ib, vb) = other.row(k);
                for (&c, &b) in ib.iter().zip(vb) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = ZERO;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                indices.push(c);
                data.push(acc[c]);
            }
            indptr[r + 1] = indices.len();
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            data,
        })
    }

    /// `diag(d) · A`.
    pub fn left_diag(&self, d: &[C64]) -> Self {
        assert_eq!(d.len(), self.rows, "left diagonal length");
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.data[k] = d[r] * out.data[k];
            }
        }
        out
    }

    /// `A · diag(d)`.
    pub fn right_diag(&self, d: &[C64]) -> Self {
        assert_eq!(d.len(), self.cols, "right diagonal length");
        let mut out = self.clone();
        for k in 0..out.data.len() {
            out.data[k] *= d[out.indices[k]];
        }
        out
    }

    /// Drops stored entries that are exactly zero.
    pub fn prune(&self) -> Self {
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut data = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                if v != ZERO {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            data,
        }
    }

    /// Sub-matrix on the given (sorted or unsorted) row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut colmap = vec![usize::MAX; self.cols];
        for (k, &c) in cols.iter().enumerate() {
            colmap[c] = k;
        }
        let mut trip = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                if colmap[c] != usize::MAX {
                    trip.push((i, colmap[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &trip).expect("indices in range")
    }

    /// Symmetric permutation: entry (i, j) moves to (p[i], p[j]).
    pub fn permute(&self, p: &[usize]) -> Self {
        assert_eq!(p.len(), self.rows, "permutation length");
        assert_eq!(self.rows, self.cols, "square matrix");
        let trip: Vec<_> = self.iter().map(|(r, c, v)| (p[r], p[c], v)).collect();
        Self::from_triplets(self.rows, self.cols, &trip).expect("permutation in range")
    }

    /// Largest |A_ij - conj(A_ji)|.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Exact Hermitian check (bitwise conjugate symmetry).
    pub fn is_hermitian_exact(&self) -> bool {
        self.rows == self.cols
            && self.iter().all(|(r, c, v)| v == self.get(c, r).conj())
            && self.adjoint().iter().all(|(r, c, v)| v == self.get(r, c))
    }

    /// Largest entry-wise difference to `other` (same shape required).
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        match self.sub(other) {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.iter().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    /// Dense copy in row-major order.
    pub fn to_dense(&self) -> ndarray::Array2<C64> {
        let mut a = ndarray::Array2::from_elem((self.rows, self.cols), ZERO);
        for (r, c, v) in self.iter() {
            a[[r, c]] = v;
        }
        a
    }

    pub fn from_dense(a: &ndarray::Array2<C64>) -> Self {
        Self::from_dense_fn(a.nrows(), a.ncols(), |r, c| a[[r, c]])
    }

    /// Row-sum and column-sum maxima of |A|.
    pub fn abs_row_col_max(&self) -> (f64, f64) {
        let mut colsum = vec![0.0; self.cols];
        let mut rmax: f64 = 0.0;
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            let mut s = 0.0;
            for (&c, v) in idx.iter().zip(val) {
                s += v.norm();
                colsum[c] += v.norm();
            }
            rmax = rmax.max(s);
        }
        (rmax, colsum.into_iter().fold(0.0, f64::max))
    }

    /// Indices of rows with at least one stored nonzero.
    pub fn nonempty_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .filter(|&r| self.row(r).1.iter().any(|v| *v != ZERO))
            .collect()
    }

    /// Indices of columns with at least one stored nonzero.
    pub fn nonempty_cols(&self) -> Vec<usize> {
        let mut seen = vec![false; self.cols];
        for (_, c, v) in self.iter() {
            if v != ZERO {
                seen[c] = true;
            }
        }
        (0..self.cols).filter(|&c| seen[c]).collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                trip.push((r1 * other.rows + r2, c1 * other.cols + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.rows * other.rows, self.cols * other.cols, &trip).expect("kron indices")
    }

    /// Assembles a block matrix from a square grid of optional blocks,
    /// each `n × n`.
    pub fn blocks(n: usize, grid: &[Vec<Option<&Csr>>]) -> Self {
        let b = grid.len();
        let mut trip = Vec::new();
        for (bi, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), b, "block grid must be square");
            for (bj, blk) in row.iter().enumerate() {
                if let Some(m) = blk {
                    assert_eq!((m.rows, m.cols), (n, n), "block shape");
                    trip.extend(m.iter().map(|(r, c, v)| (bi * n + r, bj * n + c, v)));
                }
            }
        }
        Self::from_triplets(b * n, b * n, &trip).expect("block indices")
    }

    /// Extracts block `(bi, bj)` of size `n × n`.
    pub fn block(&self, n: usize, bi: usize, bj: usize) -> Self {
        let rows: Vec<usize> = (bi * n..(bi + 1) * n).collect();
        let cols: Vec<usize> = (bj * n..(bj + 1) * n).collect();
        self.submatrix(&rows, &cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = Csr::from_triplets(2, 3, &[(0, 2, c(1.0, 0.0)), (0, 0, c(2.0, 0.0)), (0, 2, c(0.5, 1.0))]).unwrap();
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.get(0, 2), c(1.5, 1.0));
        assert_eq!(m.get(1, 1), c(0.0, 0.0));
        assert!(Csr::from_triplets(1, 1, &[(1, 0, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn matmul_and_adjoint() {
        let a = Csr::from_triplets(2, 2, &[(0, 1, c(0.0, 1.0)), (1, 0, c(2.0, 0.0))]).unwrap();
        let p = a.matmul(&a.adjoint()).unwrap();
        assert_eq!(p.get(0, 0), c(1.0, 0.0));
        assert_eq!(p.get(1, 1), c(4.0, 0.0));
        assert_eq!(p.get(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn kron_and_blocks() {
        let x = Csr::from_triplets(2, 2, &[(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]).unwrap();
        let i2 = Csr::identity(2);
        let k = x.kron(&i2);
        let b = Csr::blocks(2, &[vec![None, Some(&i2)], vec![Some(&i2), None]]);
        assert_eq!(k, b);
        assert_eq!(b.block(2, 0, 1), i2);
    }

    fn arb_sparse(n: usize) -> impl Strategy<Value = Csr> {
        proptest::collection::vec((0..n, 0..n, -2.0..2.0f64, -2.0..2.0f64), 0..3 * n)
            .prop_map(move |t| {
                let trip: Vec<_> = t.into_iter().map(|(r, c_, a, b)| (r, c_, C64::new(a, b))).collect();
                Csr::from_triplets(n, n, &trip).unwrap()
            })
    }

    proptest! {
        #[test]
        fn adjoint_is_involutive(a in arb_sparse(6)) {
            prop_assert_eq!(a.adjoint().adjoint(), a);
        }

        #[test]
        fn adjoint_matvec_matches_adjoint(a in arb_sparse(5), xs in proptest::collection::vec(-1.0..1.0f64, 5)) {
            let x: Vec<C64> = xs.iter().map(|&v| C64::new(v, -v)).collect();
            let y1 = a.adjoint_matvec(&x);
            let y2 = a.adjoint().matvec(&x);
            for (u, v) in y1.iter().zip(&y2) {
                prop_assert!((u - v).norm() < 1e-12);
            }
        }

        #[test]
        fn sum_with_adjoint_is_hermitian(a in arb_sparse(7)) {
            let h = a.add(&a.adjoint()).unwrap();
            prop_assert!(h.hermitian_defect() == 0.0);
        }

        #[test]
        fn matmul_agrees_with_dense(a in arb_sparse(4), b in arb_sparse(4)) {
            let p = a.matmul(&b).unwrap().to_dense();
            let q = a.to_dense().dot(&b.to_dense());
            for (u, v) in p.iter().zip(q.iter()) {
                prop_assert!((u - v).norm() < 1e-12);
            }
        }
    }
}
