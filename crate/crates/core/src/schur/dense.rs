//! Dense assemblies of the Schur-block operators. These are reference
//! implementations for verification at small sizes; they build every matrix
//! explicitly from operator actions and boolean selectors.

use crate::error::Result;
use crate::grid::TimePartition;
use crate::heat::HeatOperators;
use crate::linalg::{DenseLu, DenseMatrix};

use super::assemble;

pub fn jhat(ops: &HeatOperators) -> DenseMatrix {
    let n = ops.len();
    assemble(n, |x, y| ops.apply_jhat(x, y)).expect("square operator")
}

pub fn j(ops: &HeatOperators) -> DenseMatrix {
    let n = ops.len();
    assemble(n, |x, y| ops.apply_j(x, y)).expect("square operator")
}

/// `Jhat M_u^{-1} Jhat^T`.
pub fn schur_approx(ops: &HeatOperators) -> DenseMatrix {
    let jh = jhat(ops);
    jh.matmul(&jh.transpose())
        .expect("square operator")
        .scaled(1.0 / ops.mass_scale())
}

/// `J M_u^{-1} J^T + w^{-1} L M_z^{-1} L^T` with `L = -dt I`.
pub fn true_schur(ops: &HeatOperators) -> DenseMatrix {
    let jm = j(ops);
    let mut s = jm.matmul(&jm.transpose()).expect("square operator");
    let extra = ops.dt() * ops.dt() / ops.config().omega;
    for i in 0..s.rows() {
        s[(i, i)] += extra;
    }
    s.scaled(1.0 / ops.mass_scale())
}

fn selector(partition: &TimePartition, nodes: std::ops::RangeInclusive<usize>) -> DenseMatrix {
    let n_sp = partition.n_sp();
    let rows = (nodes.end() - nodes.start() + 1) * n_sp;
    let first = (nodes.start() - 1) * n_sp;
    DenseMatrix::from_fn(rows, partition.nt() * n_sp, |i, j| if j == first + i { 1.0 } else { 0.0 })
}

/// Boolean `R_s`.
pub fn restriction(partition: &TimePartition, s: usize) -> DenseMatrix {
    selector(partition, partition.nodes(s))
}

/// Boolean `Q_s`, rows ordered `[W_s; R_s]`.
pub fn extended_restriction(partition: &TimePartition, s: usize) -> DenseMatrix {
    selector(partition, partition.extended_nodes(s))
}

/// Boolean partition-of-unity matrix `D_s` on the nodes of subdomain `s`.
pub fn ownership(partition: &TimePartition, s: usize) -> DenseMatrix {
    let n_sp = partition.n_sp();
    let first = *partition.nodes(s).start();
    let size = partition.node_count(s) * n_sp;
    DenseMatrix::from_fn(size, size, |i, j| {
        if i == j && partition.owns(s, first + i / n_sp) {
            1.0
        } else {
            0.0
        }
    })
}

/// Factorizations of the subdomain blocks `R_s S~ R_s^T`.
pub fn ras_blocks(ops: &HeatOperators, partition: &TimePartition) -> Result<Vec<DenseLu>> {
    let s_hat = schur_approx(ops);
    (0..partition.nd())
        .map(|s| {
            let r = restriction(partition, s);
            let block = r.matmul(&s_hat)?.matmul(&r.transpose())?;
            DenseLu::factor(&block)
        })
        .collect()
}

/// `out = sum_s R_s^T D_s (R_s S~ R_s^T)^{-1} R_s r`.
pub fn apply_ras_blocks(partition: &TimePartition, blocks: &[DenseLu], r: &[f64], out: &mut [f64]) -> Result<()> {
    out.fill(0.0);
    for (s, lu) in blocks.iter().enumerate() {
        let local = lu.solve(&partition.restrict(s, r)?)?;
        partition.add_owned(s, &local, out);
    }
    Ok(())
}

/// `sum_s R_s^T D_s (R_s S~ R_s^T)^{-1} R_s r`, assembling the blocks on every
/// call.
pub fn dense_ras_apply(ops: &HeatOperators, partition: &TimePartition, r: &[f64]) -> Result<Vec<f64>> {
    let blocks = ras_blocks(ops, partition)?;
    let mut out = vec![0.0; r.len()];
    apply_ras_blocks(partition, &blocks, r, &mut out)?;
    Ok(out)
}

/// The one-level RASQ operator as an explicit matrix:
/// `sum_s R_s^T D_s R_s Q_s^T Jhat_s^{-T} M_s Jhat_s^{-1} Q_s R_s^T R_s`.
pub fn rasq_matrix(ops: &HeatOperators, partition: &TimePartition) -> Result<DenseMatrix> {
    let n = ops.len();
    let jh = jhat(ops);
    let mut total = DenseMatrix::zeros(n, n);
    for s in 0..partition.nd() {
        let r = restriction(partition, s);
        let q = extended_restriction(partition, s);
        let d = ownership(partition, s);
        let jhat_s = q.matmul(&jh)?.matmul(&q.transpose())?;
        let inv = crate::linalg::dense_inverse(&jhat_s)?;
        let m_s = DenseMatrix::identity(q.rows()).scaled(ops.mass_scale());
        let inner = inv.transpose().matmul(&m_s)?.matmul(&inv)?;
        let rqt = r.matmul(&q.transpose())?;
        let local = rqt.matmul(&inner)?.matmul(&rqt.transpose())?;
        let term = r.transpose().matmul(&d)?.matmul(&local)?.matmul(&r)?;
        total = total.add(&term)?;
    }
    Ok(total)
}

/// Largest entrywise difference between `R_s Jhat M_u^{-1} Jhat^T R_s^T` and
/// `R_s Q_s^T Jhat_s M_s^{-1} Jhat_s^T Q_s R_s^T`.
pub fn subdomain_identity_error(ops: &HeatOperators, partition: &TimePartition, s: usize) -> Result<f64> {
    let jh = jhat(ops);
    let r = restriction(partition, s);
    let q = extended_restriction(partition, s);
    let inv_m = 1.0 / ops.mass_scale();
    let lhs = r.matmul(&jh)?.matmul(&jh.transpose())?.matmul(&r.transpose())?.scaled(inv_m);
    let jhat_s = q.matmul(&jh)?.matmul(&q.transpose())?;
    let m_s_inv = DenseMatrix::identity(q.rows()).scaled(inv_m);
    let rqt = r.matmul(&q.transpose())?;
    let rhs = rqt
        .matmul(&jhat_s)?
        .matmul(&m_s_inv)?
        .matmul(&jhat_s.transpose())?
        .matmul(&rqt.transpose())?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// Rank by Gaussian elimination with complete pivoting; pivots below
/// `rel_tol` times the largest entry count as zero.
pub fn numerical_rank(a: &DenseMatrix, rel_tol: f64) -> usize {
    let (rows, cols) = (a.rows(), a.cols());
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let cutoff = rel_tol * a.max_abs();
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..rows {
            for j in k..cols {
                let v = m[i * cols + j].abs();
                if v > best {
                    (pi, pj, best) = (i, j, v);
                }
            }
        }
        if best <= cutoff {
            break;
        }
        rank += 1;
        for j in 0..cols {
            m.swap(k * cols + j, pi * cols + j);
        }
        for i in 0..rows {
            m.swap(i * cols + k, i * cols + pj);
        }
        let p = m[k * cols + k];
        for i in k + 1..rows {
            let f = m[i * cols + k] / p;
            if f != 0.0 {
                for j in k..cols {
                    m[i * cols + j] -= f * m[k * cols + j];
                }
            }
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;

    fn setup(nt: usize, nd: usize, nx: usize) -> (HeatOperators, TimePartition) {
        let c = ProblemConfig {
            nt,
            nd,
            nx,
            ny: nx,
            omega: 1e-2,
            ..Default::default()
        };
        let ops = HeatOperators::new(&c).unwrap();
        let p = TimePartition::new(nt, nd, ops.n_sp()).unwrap();
        (ops, p)
    }

    #[test]
    fn boolean_operator_identities() {
        let (_, p) = setup(9, 3, 3);
        let n = 9 * p.n_sp();
        let mut pou = DenseMatrix::zeros(n, n);
        for s in 0..3 {
            let r = restriction(&p, s);
            let q = extended_restriction(&p, s);
            let d = ownership(&p, s);
            pou = pou.add(&r.transpose().matmul(&d).unwrap().matmul(&r).unwrap()).unwrap();
            assert_eq!(q.matmul(&q.transpose()).unwrap(), DenseMatrix::identity(q.rows()));
            let qtq = q.transpose().matmul(&q).unwrap();
            assert_eq!(r.matmul(&qtq).unwrap(), r);
            assert_eq!(qtq.matmul(&r.transpose()).unwrap(), r.transpose());
        }
        assert_eq!(pou, DenseMatrix::identity(n));
    }

    #[test]
    fn subdomain_identity_nine_three() {
        let (ops, p) = setup(9, 3, 2);
        assert_eq!(ops.n_sp(), 1);
        for s in 0..3 {
            assert!(subdomain_identity_error(&ops, &p, s).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(numerical_rank(&DenseMatrix::identity(4), 1e-12), 4);
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]);
        assert_eq!(numerical_rank(&a, 1e-12), 1);
    }
}
