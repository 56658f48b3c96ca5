//! Compressed-row sparse matrices.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rustc_hash::FxHashMap;

/// Square matrix in compressed-row storage; column indices ascend within a
/// row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates and
    /// dropping entries with `|v| <= drop_tol` (so exact zeros always go).
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)], drop_tol: f64) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            rows[r].push((c, v));
        }
        Self::from_rows(n, rows, drop_tol)
    }

    /// Builds a symmetric matrix from its upper triangle keyed by `(i, j)`
    /// with `i <= j`.
    pub fn from_upper(n: usize, upper: &FxHashMap<(u32, u32), f64>, drop_tol: f64) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &v) in upper {
            let (i, j) = (i as usize, j as usize);
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(n, rows, drop_tol)
    }

    fn from_rows(n: usize, mut rows: Vec<Vec<(usize, f64)>>, drop_tol: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 && v.abs() > drop_tol {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let rows = (0..n).map(|i| (0..n).map(|j| (j, a[(i, j)])).collect()).collect();
        Self::from_rows(n, rows, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored fraction of the `n²` entries.
    pub fn density(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.n as f64 * self.n as f64)
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`, summing each row in ascending column order.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, out) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for k in a..b {
                s += self.vals[k] * x[self.cols[k]];
            }
            *out = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a A + b B` on the union pattern. Entries that cancel to exactly zero
    /// are dropped.
    pub fn linear_combination(a: f64, lhs: &Self, b: f64, rhs: &Self) -> Self {
        assert_eq!(lhs.n, rhs.n, "dimension mismatch");
        let n = lhs.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(lhs.nnz().max(rhs.nnz()));
        let mut vals = Vec::with_capacity(lhs.nnz().max(rhs.nnz()));
        row_ptr.push(0);
        for i in 0..n {
            let (ca, va) = lhs.row(i);
            let (cb, vb) = rhs.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (c, v) = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    p += 1;
                    (ca[p - 1], a * va[p - 1])
                } else if p >= ca.len() || cb[q] < ca[p] {
                    q += 1;
                    (cb[q - 1], b * vb[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ca[p - 1], a * va[p - 1] + b * vb[q - 1])
                };
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    /// Principal submatrix on `ordinals` (ascending); row/column `r` of the
    /// result is `ordinals[r]` of `self`.
    pub fn submatrix(&self, ordinals: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (r, &o) in ordinals.iter().enumerate() {
            map[o] = r;
        }
        let m = ordinals.len();
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &o in ordinals {
            let (c, v) = self.row(o);
            let start = cols.len();
            for (cc, vv) in c.iter().zip(v) {
                let r = map[*cc];
                if r != usize::MAX {
                    cols.push(r);
                    vals.push(*vv);
                }
            }
            // keep columns ascending when `ordinals` is not sorted
            if !ordinals.windows(2).all(|w| w[0] < w[1]) {
                let mut pairs: Vec<(usize, f64)> = cols[start..]
                    .iter()
                    .copied()
                    .zip(vals[start..].iter().copied())
                    .collect();
                pairs.sort_by_key(|p| p.0);
                for (k, (c2, v2)) in pairs.into_iter().enumerate() {
                    cols[start + k] = c2;
                    vals[start + k] = v2;
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n: m,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (cc, vv) in c.iter().zip(v) {
                d[(i, *cc)] = *vv;
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji| / max(1, |A_ij|)`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (cc, vv) in c.iter().zip(v) {
                let d = (vv - self.get(*cc, i)).abs() / vv.abs().max(1.0);
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Whether a dense Cholesky factorization succeeds.
    pub fn cholesky_succeeds(&self) -> bool {
        self.to_dense().cholesky().is_some()
    }

    /// Matrix Market coordinate output. Symmetric matrices are written in
    /// `symmetric` mode (lower triangle), others as `general`.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        let symmetric = self.max_asymmetry() == 0.0;
        let mode = if symmetric { "symmetric" } else { "general" };
        writeln!(w, "%%MatrixMarket matrix coordinate real {mode}")?;
        let entries: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(move |(cc, _)| !symmetric || **cc <= i)
                    .map(move |(cc, vv)| (i, *cc, *vv))
                    .collect::<Vec<_>>()
            })
            .collect();
        writeln!(w, "{} {} {}", self.n, self.n, entries.len())?;
        for (i, j, v) in entries {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            &[
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (2, 2, 1.0),
                (2, 2, 0.5),
                (1, 2, 0.0),
            ],
            0.0,
        )
    }

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(2, 2), 1.5);
        assert_eq!(a.get(1, 2), 0.0);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![1.0, 1.0, 1.5]);
        assert_eq!(a.max_asymmetry(), 0.0);
    }

    #[test]
    fn combination_and_submatrix() {
        let a = sample();
        let i = CsrMatrix::identity(3);
        let c = CsrMatrix::linear_combination(1.0, &a, 2.0, &i);
        assert_eq!(c.get(0, 0), 4.0);
        assert_eq!(c.get(0, 1), -1.0);
        let s = c.submatrix(&[0, 2]);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get(1, 1), 3.5);
        assert_eq!(s.get(0, 1), 0.0);
        assert!(c.cholesky_succeeds());
    }

    #[test]
    fn matrix_market_round_numbers() {
        let mut buf = Vec::new();
        sample().write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "%%MatrixMarket matrix coordinate real symmetric");
        assert_eq!(lines.next().unwrap(), "3 3 4");
    }
}
