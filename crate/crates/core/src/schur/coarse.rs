//! Nicolaides-type coarse space in time.
//!
//! Each subdomain contributes a constant and a linear temporal profile over its
//! time-nodes, masked by the ownership partition of unity so different
//! subdomains have disjoint supports. The `scalar` variant replicates each
//! profile over all spatial unknowns (two columns per subdomain); `per-dof`
//! tensors it with every spatial unit vector (two columns per subdomain and
//! spatial unknown).
//!
//! The Galerkin operator `Z^T S~ Z` is assembled with window-local matrix-free
//! products: a column supported on nodes `a..=b` has `S~ z` supported on
//! `a-1..=b+1`, so only neighbouring subdomains couple.

use crate::config::CoarseVariant;
use crate::error::{check_len, Error, Result};
use crate::grid::TimePartition;
use crate::heat::HeatOperators;
use crate::linalg::{DenseLu, DenseMatrix, SparseLu, SparseMatrix};

/// One basis vector of the coarse space.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseColumn {
    pub subdomain: usize,
    /// First time-node of the (owned) support.
    pub first_node: usize,
    /// Profile values on `first_node..first_node + values.len()`.
    pub values: Vec<f64>,
    /// Spatial unknown for the per-dof variant; `None` spans all of them.
    pub dof: Option<usize>,
}

impl CoarseColumn {
    fn last_node(&self) -> usize {
        self.first_node + self.values.len() - 1
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(DenseLu),
    Sparse(SparseLu),
}

#[derive(Debug, Clone)]
pub struct CoarseSpace {
    variant: CoarseVariant,
    n_sp: usize,
    columns: Vec<CoarseColumn>,
    /// first column index of each subdomain, plus a final sentinel
    subdomain_start: Vec<usize>,
    operator: SparseMatrix,
    factor: Factor,
}

/// Constant and linear profiles of subdomain `s`, already masked to owned
/// nodes. The linear profile runs from -1 to 1 over all `N_s` nodes of the
/// subdomain and is dropped when fewer than two nodes are owned.
pub fn profiles(partition: &TimePartition, s: usize) -> Vec<(usize, Vec<f64>)> {
    let nodes = partition.nodes(s);
    let (a, count) = (*nodes.start(), partition.node_count(s));
    let owned = partition.owned_nodes(s);
    let first = *owned.start();
    let owned_count = owned.end() - owned.start() + 1;
    let mut out = vec![(first, vec![1.0; owned_count])];
    if count >= 2 && owned_count >= 2 {
        let lin = owned
            .map(|n| -1.0 + 2.0 * (n - a) as f64 / (count - 1) as f64)
            .collect();
        out.push((first, lin));
    }
    out
}

impl CoarseSpace {
    pub fn build(ops: &HeatOperators, partition: &TimePartition, variant: CoarseVariant) -> Result<Self> {
        check_len(ops.n_sp(), partition.n_sp())?;
        check_len(ops.nt(), partition.nt())?;
        let n_sp = ops.n_sp();
        let mut columns = Vec::new();
        let mut subdomain_start = Vec::with_capacity(partition.nd() + 1);
        for s in 0..partition.nd() {
            subdomain_start.push(columns.len());
            let profs = profiles(partition, s);
            match variant {
                CoarseVariant::Scalar => {
                    for (first, values) in profs {
                        columns.push(CoarseColumn {
                            subdomain: s,
                            first_node: first,
                            values,
                            dof: None,
                        });
                    }
                }
                CoarseVariant::PerDof => {
                    for k in 0..n_sp {
                        for (first, values) in &profs {
                            columns.push(CoarseColumn {
                                subdomain: s,
                                first_node: *first,
                                values: values.clone(),
                                dof: Some(k),
                            });
                        }
                    }
                }
            }
        }
        subdomain_start.push(columns.len());

        let mut space = Self {
            variant,
            n_sp,
            columns,
            subdomain_start,
            operator: SparseMatrix::from_triplets(0, 0, Vec::new()),
            factor: Factor::Dense(DenseLu::factor(&DenseMatrix::zeros(0, 0))?),
        };
        space.operator = space.galerkin_operator(ops, partition)?;
        let rank_err = |e: Error| match e {
            Error::Singular { .. } => Error::RankDeficientCoarse {
                variant: variant.as_str(),
            },
            other => other,
        };
        space.factor = match variant {
            CoarseVariant::Scalar => Factor::Dense(DenseLu::factor(&space.operator.to_dense()).map_err(rank_err)?),
            CoarseVariant::PerDof => Factor::Sparse(space.factor_per_dof().map_err(rank_err)?),
        };
        Ok(space)
    }

    fn galerkin_operator(&self, ops: &HeatOperators, partition: &TimePartition) -> Result<SparseMatrix> {
        let n_sp = self.n_sp;
        let nt = ops.nt();
        let nd = self.subdomain_start.len() - 1;
        let inv_m = 1.0 / ops.mass_scale();
        let mut triplets = Vec::new();
        let mut v = Vec::new();
        let mut tmp = Vec::new();
        let mut sv = Vec::new();
        let mut acc = Vec::new();
        for (ci, col) in self.columns.iter().enumerate() {
            let lo = col.first_node.saturating_sub(1).max(1);
            let hi = (col.last_node() + 1).min(nt);
            let len = (hi - lo + 1) * n_sp;
            v.clear();
            v.resize(len, 0.0);
            self.scatter_column(col, lo, 1.0, &mut v);
            tmp.clear();
            tmp.resize(len, 0.0);
            sv.clear();
            sv.resize(len, 0.0);
            ops.apply_jhat_t(&v, &mut tmp)?;
            crate::linalg::scale(inv_m, &mut tmp);
            ops.apply_jhat(&tmp, &mut sv)?;

            let s = col.subdomain;
            let first = self.subdomain_start[s.saturating_sub(1)];
            let last = self.subdomain_start[(s + 2).min(nd)];
            match self.variant {
                CoarseVariant::Scalar => {
                    for (cj, other) in self.columns[first..last].iter().enumerate() {
                        let value = self.gather_column(other, lo, hi, &sv);
                        if value != 0.0 {
                            triplets.push((first + cj, ci, value));
                        }
                    }
                }
                CoarseVariant::PerDof => {
                    acc.clear();
                    acc.resize(last - first, 0.0);
                    for n in lo..=hi {
                        let owner = partition.owner(n);
                        let start = self.subdomain_start[owner];
                        let nprof = (self.subdomain_start[owner + 1] - start) / n_sp;
                        let node = &sv[(n - lo) * n_sp..(n - lo + 1) * n_sp];
                        for p in 0..nprof {
                            let proto = &self.columns[start + p];
                            let phi = proto.values[n - proto.first_node];
                            for (d, &x) in node.iter().enumerate() {
                                acc[start + d * nprof + p - first] += phi * x;
                            }
                        }
                    }
                    for (k, &value) in acc.iter().enumerate() {
                        if value != 0.0 {
                            triplets.push((first + k, ci, value));
                        }
                    }
                }
            }
        }
        let dim = self.columns.len();
        Ok(SparseMatrix::from_triplets(dim, dim, triplets))
    }

    /// Factors the per-dof operator in whichever of the subdomain-major or
    /// dof-major orderings has the narrower band.
    fn factor_per_dof(&self) -> Result<SparseLu> {
        let nd = self.subdomain_start.len() - 1;
        let mut dof_major = Vec::with_capacity(self.dim());
        for d in 0..self.n_sp {
            for s in 0..nd {
                let start = self.subdomain_start[s];
                let nprof = (self.subdomain_start[s + 1] - start) / self.n_sp;
                dof_major.extend((0..nprof).map(|p| start + d * nprof + p));
            }
        }
        let (kl, ku) = self.operator.bandwidths();
        if self.operator.permuted_bandwidth(&dof_major) < kl.max(ku) {
            SparseLu::factor_permuted(&self.operator, dof_major)
        } else {
            SparseLu::factor(&self.operator)
        }
    }

    /// `out += alpha * z` on a window starting at node `lo`.
    fn scatter_column(&self, col: &CoarseColumn, lo: usize, alpha: f64, out: &mut [f64]) {
        let n_sp = self.n_sp;
        for (k, &phi) in col.values.iter().enumerate() {
            let base = (col.first_node + k - lo) * n_sp;
            let node = &mut out[base..base + n_sp];
            match col.dof {
                Some(d) => node[d] += alpha * phi,
                None => node.iter_mut().for_each(|x| *x += alpha * phi),
            }
        }
    }

    /// `z^T x` for `x` stored on the window `lo..=hi`.
    fn gather_column(&self, col: &CoarseColumn, lo: usize, hi: usize, x: &[f64]) -> f64 {
        let n_sp = self.n_sp;
        let a = col.first_node.max(lo);
        let b = col.last_node().min(hi);
        let mut sum = 0.0;
        for n in a..=b {
            let phi = col.values[n - col.first_node];
            let node = &x[(n - lo) * n_sp..(n - lo + 1) * n_sp];
            sum += match col.dof {
                Some(d) => phi * node[d],
                None => phi * node.iter().sum::<f64>(),
            };
        }
        sum
    }

    pub fn variant(&self) -> CoarseVariant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[CoarseColumn] {
        &self.columns
    }

    /// The Galerkin operator `S0 = Z^T S~ Z`.
    pub fn operator(&self) -> &SparseMatrix {
        &self.operator
    }

    /// `R_0 r = Z^T r`.
    pub fn restrict(&self, r: &[f64]) -> Vec<f64> {
        let nt = r.len() / self.n_sp;
        self.columns.iter().map(|c| self.gather_column(c, 1, nt, r)).collect()
    }

    /// `out += R_0^T y = Z y`.
    pub fn prolong_add(&self, y: &[f64], out: &mut [f64]) {
        for (c, &yc) in self.columns.iter().zip(y) {
            if yc != 0.0 {
                self.scatter_column(c, 1, yc, out);
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Factor::Dense(lu) => lu.solve(b),
            Factor::Sparse(lu) => lu.solve(b),
        }
    }

    /// `out += R_0^T S0^{-1} R_0 r`.
    pub fn add_correction(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(r.len(), out.len())?;
        let y = self.solve(&self.restrict(r))?;
        self.prolong_add(&y, out);
        Ok(())
    }

    /// `R_0^T S0^{-1} R_0 r`.
    pub fn correction(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; r.len()];
        self.add_correction(r, &mut out)?;
        Ok(out)
    }

    /// Dense `Z` with `len` rows.
    pub fn basis_matrix(&self, len: usize) -> DenseMatrix {
        let mut z = DenseMatrix::zeros(len, self.dim());
        let mut col = vec![0.0; len];
        for (j, c) in self.columns.iter().enumerate() {
            col.fill(0.0);
            self.scatter_column(c, 1, 1.0, &mut col);
            for (i, v) in col.iter().enumerate() {
                z[(i, j)] = *v;
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;
    use crate::schur::dense;

    fn setup(nt: usize, nd: usize, nx: usize, ny: usize) -> (HeatOperators, TimePartition) {
        let c = ProblemConfig {
            nt,
            nd,
            nx,
            ny,
            omega: 1e-3,
            ..Default::default()
        };
        let ops = HeatOperators::new(&c).unwrap();
        let p = TimePartition::new(nt, nd, ops.n_sp()).unwrap();
        (ops, p)
    }

    fn galerkin_oracle(ops: &HeatOperators, space: &CoarseSpace) -> DenseMatrix {
        let z = space.basis_matrix(ops.len());
        let s = dense::schur_approx(ops);
        z.transpose().matmul(&s).unwrap().matmul(&z).unwrap()
    }

    #[test]
    fn linear_profile_spacing() {
        // N_s = 4 requires m = 3 for s >= 1; use the unmasked first subdomain with m = 4
        let p = TimePartition::new(8, 2, 1).unwrap();
        let prof = profiles(&p, 0);
        let expected = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
        assert!(prof[1].1.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
        // subdomain 1 has nodes 4..=8; node 4 belongs to subdomain 0
        let prof = profiles(&p, 1);
        assert_eq!(prof[0], (5, vec![1.0; 4]));
        assert_eq!(prof[1].1, vec![-0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn single_subdomain_scalar() {
        let (ops, p) = setup(5, 1, 3, 4);
        let space = CoarseSpace::build(&ops, &p, CoarseVariant::Scalar).unwrap();
        assert_eq!(space.dim(), 2);
        let s0 = space.operator().to_dense();
        let oracle = galerkin_oracle(&ops, &space);
        assert!(s0.max_abs_diff(&oracle) <= 1e-11 * oracle.max_abs());
        assert!((s0[(0, 1)] - s0[(1, 0)]).abs() <= 1e-12 * s0.max_abs());
        assert!(s0[(0, 0)] > 0.0 && s0[(0, 0)] * s0[(1, 1)] > s0[(0, 1)] * s0[(1, 0)]);
    }

    #[test]
    fn per_dof_matches_dense_galerkin() {
        let (ops, p) = setup(6, 2, 3, 3);
        let space = CoarseSpace::build(&ops, &p, CoarseVariant::PerDof).unwrap();
        assert_eq!(space.dim(), 16);
        let oracle = galerkin_oracle(&ops, &space);
        assert!(space.operator().to_dense().max_abs_diff(&oracle) <= 1e-11 * oracle.max_abs());
    }

    #[test]
    fn scalar_matches_dense_galerkin_many_subdomains() {
        let (ops, p) = setup(12, 4, 4, 3);
        let space = CoarseSpace::build(&ops, &p, CoarseVariant::Scalar).unwrap();
        assert_eq!(space.dim(), 8);
        let oracle = galerkin_oracle(&ops, &space);
        assert!(space.operator().to_dense().max_abs_diff(&oracle) <= 1e-11 * oracle.max_abs());
    }

    #[test]
    fn supports_are_disjoint_across_subdomains() {
        let (ops, p) = setup(12, 4, 3, 3);
        let space = CoarseSpace::build(&ops, &p, CoarseVariant::Scalar).unwrap();
        let z = space.basis_matrix(ops.len());
        for i in 0..z.rows() {
            let owners: Vec<usize> = (0..z.cols())
                .filter(|&j| z[(i, j)] != 0.0)
                .map(|j| space.columns()[j].subdomain)
                .collect();
            assert!(owners.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn one_step_per_subdomain_drops_linear_columns() {
        let (ops, p) = setup(4, 4, 3, 3);
        let space = CoarseSpace::build(&ops, &p, CoarseVariant::Scalar).unwrap();
        assert_eq!(space.dim(), 4);
    }

    #[test]
    fn restrict_and_prolong_are_adjoint() {
        let (ops, p) = setup(8, 2, 3, 4);
        let space = CoarseSpace::build(&ops, &p, CoarseVariant::PerDof).unwrap();
        let r: Vec<f64> = (0..ops.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..space.dim()).map(|k| (k as f64 * 0.11).cos()).collect();
        let mut zy = vec![0.0; ops.len()];
        space.prolong_add(&y, &mut zy);
        let lhs = crate::linalg::dot(&space.restrict(&r), &y);
        let rhs = crate::linalg::dot(&r, &zy);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}
