use crate::error::{check_len, Result};

use super::{BandedLu, BandedMatrix, DenseMatrix};

/// Compressed sparse row storage with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.rows(), a.cols(), t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.rows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// `P A P^T` with `(P x)_i = x[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<SparseMatrix> {
        crate::error::check_len(self.rows, perm.len())?;
        crate::error::check_len(self.rows, self.cols)?;
        let mut inv = vec![usize::MAX; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inv[p] != usize::MAX {
                return Err(crate::Error::Config("not a permutation".into()));
            }
            inv[p] = i;
        }
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                t.push((inv[i], inv[j], v));
            }
        }
        Ok(SparseMatrix::from_triplets(self.rows, self.cols, t))
    }

    /// Largest `|i - j|` over stored entries after permuting with `perm`.
    pub fn permuted_bandwidth(&self, perm: &[usize]) -> usize {
        let mut inv = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut bw = 0;
        for i in 0..self.rows {
            for (j, _) in self.row(i) {
                bw = bw.max(inv[i].abs_diff(inv[j]));
            }
        }
        bw
    }

    pub fn to_banded(&self) -> BandedMatrix {
        assert_eq!(self.rows, self.cols, "banded storage needs a square matrix");
        let (kl, ku) = self.bandwidths();
        let mut b = BandedMatrix::zeros(self.rows, kl, ku);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                b.set(i, j, v);
            }
        }
        b
    }
}

/// Direct solver for sparse matrices whose pattern is confined to a band
/// (the coarse operators assembled here are block tridiagonal in time).
/// An optional symmetric permutation can be supplied to narrow the band.
#[derive(Debug, Clone)]
pub struct SparseLu {
    inner: BandedLu,
    /// row `i` of the factored matrix is row `perm[i]` of the original
    perm: Option<Vec<usize>>,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(crate::Error::Shape {
                expected: a.rows,
                found: a.cols,
            });
        }
        Ok(Self {
            inner: BandedLu::factor(&a.to_banded())?,
            perm: None,
        })
    }

    /// Factors `P A P^T` where `(P x)_i = x[perm[i]]`.
    pub fn factor_permuted(a: &SparseMatrix, perm: Vec<usize>) -> Result<Self> {
        crate::error::check_len(a.rows, perm.len())?;
        let b = a.permuted(&perm)?;
        Ok(Self {
            inner: Self::factor(&b)?.inner,
            perm: Some(perm),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn pivot_growth(&self) -> f64 {
        self.inner.pivot_growth()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.dim(), b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        match &self.perm {
            None => self.inner.solve_in_place(b),
            Some(perm) => {
                let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
                self.inner.solve_in_place(&mut y);
                for (&p, v) in perm.iter().zip(y) {
                    b[p] = v;
                }
            }
        }
    }
}
