use crate::error::{check_len, Error, Result};

use super::PIVOT_TOL;

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored by rows:
/// entry `(i, j)` lives at `data[i * width + (j + kl - i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let kl = kl.min(n.saturating_sub(1));
        let ku = ku.min(n.saturating_sub(1));
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n, 0, 0);
        for i in 0..n {
            a.set(i, i, 1.0);
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Columns of row `i` that are inside the band.
    fn row_cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        let w = self.width();
        for i in 0..self.n {
            let cols = self.row_cols(i);
            let row = &self.data[i * w + cols.start + self.kl - i..][..cols.len()];
            y[i] = super::dot(row, &x[cols]);
        }
    }

    /// `y = A^T x`
    pub fn matvec_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.fill(0.0);
        let w = self.width();
        for i in 0..self.n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let cols = self.row_cols(i);
            let row = &self.data[i * w + cols.start + self.kl - i..][..cols.len()];
            for (yj, a) in y[cols].iter_mut().zip(row) {
                *yj += a * xi;
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_cols(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> super::DenseMatrix {
        super::DenseMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Returns `self + alpha * I`.
    pub fn shifted(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.add_to(i, i, alpha);
        }
        out
    }
}

/// Banded LU with partial pivoting. Row interchanges widen the upper band of
/// `U` to `kl + ku`, so each factor row carries `2 kl + ku + 1` entries.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    /// upper bandwidth of U
    ku: usize,
    /// row `i` holds columns `i - kl ..= i + ku`
    data: Vec<f64>,
    piv: Vec<usize>,
    growth: f64,
}

impl BandedLu {
    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = (a.kl + a.ku).min(n.saturating_sub(1));
        let w = kl + ku + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for j in a.row_cols(i) {
                data[i * w + j + kl - i] = a.get(i, j);
            }
        }
        let at = |i: usize, j: usize| i * w + j + kl - i;
        let threshold = PIVOT_TOL * a.norm_inf();
        let a_max = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut pmax = data[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = data[at(i, k)].abs();
                if v > pmax {
                    p = i;
                    pmax = v;
                }
            }
            if pmax <= threshold || pmax == 0.0 {
                return Err(Error::Singular { pivot: k });
            }
            piv[k] = p;
            let last_col = (k + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    data.swap(at(k, j), at(p, j));
                }
            }
            let span = last_col - k + 1;
            let (head, tail) = data.split_at_mut((k + 1) * w);
            let prow = &head[k * w + kl..k * w + kl + span];
            let pivot = prow[0];
            for i in k + 1..=last_row {
                let start = (i - k - 1) * w + k + kl - i;
                let row = &mut tail[start..start + span];
                let l = row[0] / pivot;
                row[0] = l;
                if l != 0.0 {
                    for (r, p) in row[1..].iter_mut().zip(&prow[1..]) {
                        *r -= l * p;
                    }
                }
            }
        }
        let mut u_max = 0.0f64;
        for i in 0..n {
            for j in i..=(i + ku).min(n - 1) {
                u_max = u_max.max(data[at(i, j)].abs());
            }
        }
        let growth = if a_max > 0.0 { u_max / a_max } else { 1.0 };
        Ok(Self {
            n,
            kl,
            ku,
            data,
            piv,
            growth,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pivot_growth(&self) -> f64 {
        self.growth
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.kl + self.ku + 1) + j + self.kl - i]
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let w = kl + ku + 1;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let last = (i + ku).min(n - 1);
            let row = &self.data[i * w + kl..i * w + kl + (last - i) + 1];
            let s = b[i] - super::dot(&row[1..], &b[i + 1..=last]);
            b[i] = s / row[0];
        }
    }

    /// Overwrites `b` with `A^{-T} b`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        // U^T y = b, forward
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(ku)..i {
                s -= self.at(j, i) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
        // then undo the eliminations in reverse order
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.at(i, k) * b[i];
            }
            b[k] = s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x = b.to_vec();
        self.solve_transpose_in_place(&mut x);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{max_abs_diff, DenseMatrix};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain Gaussian elimination with partial pivoting on a dense copy,
    /// written without reference to the factorization code above.
    fn gauss_oracle(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.rows();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = a.row(i).to_vec();
                r.push(b[i]);
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap())
                .unwrap();
            m.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (m[r][n] - s) / m[r][r];
        }
        x
    }

    fn random_banded(rng: &mut ChaCha8Rng, n: usize, kl: usize, ku: usize, dominant: bool) -> BandedMatrix {
        let mut a = BandedMatrix::zeros(n, kl, ku);
        for i in 0..n {
            let mut off = 0.0;
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                if i != j {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    off += v.abs();
                    a.set(i, j, v);
                }
            }
            let d: f64 = if dominant { off + rng.gen_range(0.5..2.0) } else { rng.gen_range(-1.0..1.0) };
            a.set(i, i, d);
        }
        a
    }

    #[test]
    fn identity_solve() {
        let lu = BandedLu::factor(&BandedMatrix::identity(7)).unwrap();
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        assert_eq!(lu.solve(&b).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let mut a = BandedMatrix::zeros(2, 1, 1);
        a.set(0, 0, 2.0);
        a.set(0, 1, -1.0);
        a.set(1, 0, -1.0);
        a.set(1, 1, 2.0);
        let x = BandedLu::factor(&a).unwrap().solve(&[1.0, 0.0]).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_banded(&mut rng, 50, 7, 7, true);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = BandedLu::factor(&a).unwrap().solve(&b).unwrap();
        let expected = gauss_oracle(&a.to_dense(), &b);
        let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(&x, &expected) <= 1e-10 * scale);
    }

    #[test]
    fn residual_bound_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let n = rng.gen_range(1..30);
            let kl = rng.gen_range(0..n.max(1));
            let ku = rng.gen_range(0..n.max(1));
            let a = random_banded(&mut rng, n, kl, ku, trial % 2 == 0);
            let lu = match BandedLu::factor(&a) {
                Ok(lu) => lu,
                Err(_) => continue,
            };
            if lu.pivot_growth() > 1e6 {
                continue;
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = lu.solve(&b).unwrap();
            let ax = a.matvec(&x).unwrap();
            let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let res = max_abs_diff(&ax, &b);
            assert!(res <= 1e-10 * (a.norm_inf() * xn + bn), "trial {trial}: {res}");
        }
    }

    #[test]
    fn transpose_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let n = rng.gen_range(2..40);
            let (kl, ku) = (rng.gen_range(0..4), rng.gen_range(0..4));
            let a = random_banded(&mut rng, n, kl, ku, trial % 2 == 0);
            let Ok(lu) = BandedLu::factor(&a) else { continue };
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = lu.solve_transpose(&b).unwrap();
            if trial % 2 == 0 {
                let y = gauss_oracle(&a.to_dense().transpose(), &b);
                let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(max_abs_diff(&x, &y) <= 1e-10 * scale);
            } else {
                // pivoting path: check the transposed residual instead
                let r = a.to_dense().transpose().matvec(&x).unwrap();
                let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(max_abs_diff(&r, &b) <= 1e-10 * (a.norm_inf() * xn + 1.0));
            }
        }
    }

    #[test]
    fn singular_band_reports_pivot() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        match BandedLu::factor(&a) {
            Err(Error::Singular { pivot: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
