//! Approximate inverses of the Schur block `S~ = Jhat M_u^{-1} Jhat^T`.
//!
//! The one-level method is restricted additive Schwarz in time where every
//! subdomain inverse is replaced by a forward and an adjoint time-integration
//! sweep over the subdomain's extended window:
//!
//! ```text
//! sum_s R_s^T D_s (R_s Q_s^T Jhat_s^{-T} M_s Jhat_s^{-1} Q_s R_s^T) R_s
//! ```
//!
//! The two-level method adds a Galerkin correction on a Nicolaides-type coarse
//! space spanned by a constant and a linear temporal profile per subdomain.

mod coarse;
pub mod dense;

pub use coarse::{CoarseColumn, CoarseSpace};

use crate::config::{CoarseOrder, CoarseVariant, TwoLevelForm};
use crate::error::{check_len, Result};
use crate::grid::TimePartition;
use crate::heat::HeatOperators;
use crate::linalg::{DenseLu, DenseMatrix};

/// `out = S~_RASQ^{-1} r`.
pub fn apply_rasq(ops: &HeatOperators, partition: &TimePartition, r: &[f64], out: &mut [f64]) -> Result<()> {
    check_len(ops.len(), r.len())?;
    check_len(ops.len(), out.len())?;
    out.fill(0.0);
    let n_sp = ops.n_sp();
    let m = ops.mass_scale();
    let mut window = Vec::new();
    for s in 0..partition.nd() {
        let nodes = partition.nodes(s);
        let ext = partition.extended_nodes(s);
        let offset = (nodes.start() - ext.start()) * n_sp;
        let len = (ext.end() - ext.start() + 1) * n_sp;
        window.clear();
        window.resize(len, 0.0);
        // Q_s R_s^T R_s r: zero on the W-node
        window[offset..].copy_from_slice(&r[(nodes.start() - 1) * n_sp..nodes.end() * n_sp]);
        ops.forward_solve_in_place(&mut window);
        crate::linalg::scale(m, &mut window);
        ops.adjoint_solve_in_place(&mut window);
        partition.add_owned(s, &window[offset..], out);
    }
    Ok(())
}

enum Kind {
    Identity,
    OneLevel,
    TwoLevel {
        coarse: CoarseSpace,
        form: TwoLevelForm,
        order: CoarseOrder,
    },
    /// Explicit inverse via a dense factorization (desk scale only).
    Dense { lu: DenseLu, label: &'static str },
    DenseRas { blocks: Vec<DenseLu> },
}

/// The Schur-block solver used inside the block preconditioner.
pub struct SchurSolver<'a> {
    ops: &'a HeatOperators,
    partition: &'a TimePartition,
    kind: Kind,
}

impl<'a> SchurSolver<'a> {
    pub fn identity(ops: &'a HeatOperators, partition: &'a TimePartition) -> Self {
        Self {
            ops,
            partition,
            kind: Kind::Identity,
        }
    }

    pub fn one_level(ops: &'a HeatOperators, partition: &'a TimePartition) -> Self {
        Self {
            ops,
            partition,
            kind: Kind::OneLevel,
        }
    }

    pub fn two_level(
        ops: &'a HeatOperators,
        partition: &'a TimePartition,
        variant: CoarseVariant,
        form: TwoLevelForm,
        order: CoarseOrder,
    ) -> Result<Self> {
        let coarse = CoarseSpace::build(ops, partition, variant)?;
        Ok(Self {
            ops,
            partition,
            kind: Kind::TwoLevel { coarse, form, order },
        })
    }

    /// Exact inverse of `S~ = Jhat M_u^{-1} Jhat^T`, assembled densely.
    pub fn dense_schur_approx(ops: &'a HeatOperators, partition: &'a TimePartition) -> Result<Self> {
        let lu = DenseLu::factor(&dense::schur_approx(ops))?;
        Ok(Self {
            ops,
            partition,
            kind: Kind::Dense { lu, label: "dense-schur" },
        })
    }

    /// Exact inverse of the true Schur complement `J M_u^{-1} J^T + w^{-1} L M_z^{-1} L^T`.
    pub fn dense_true_schur(ops: &'a HeatOperators, partition: &'a TimePartition) -> Result<Self> {
        let lu = DenseLu::factor(&dense::true_schur(ops))?;
        Ok(Self {
            ops,
            partition,
            kind: Kind::Dense { lu, label: "true-schur" },
        })
    }

    /// Classical restricted additive Schwarz with exact subdomain inverses of
    /// `R_s S~ R_s^T`.
    pub fn dense_ras(ops: &'a HeatOperators, partition: &'a TimePartition) -> Result<Self> {
        let blocks = dense::ras_blocks(ops, partition)?;
        Ok(Self {
            ops,
            partition,
            kind: Kind::DenseRas { blocks },
        })
    }

    pub fn label(&self) -> &'static str {
        match &self.kind {
            Kind::Identity => "identity",
            Kind::OneLevel => "one-level",
            Kind::TwoLevel { .. } => "two-level",
            Kind::Dense { label, .. } => label,
            Kind::DenseRas { .. } => "dense-ras",
        }
    }

    pub fn coarse_space(&self) -> Option<&CoarseSpace> {
        match &self.kind {
            Kind::TwoLevel { coarse, .. } => Some(coarse),
            _ => None,
        }
    }

    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; r.len()];
        self.apply_into(r, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        let ops = self.ops;
        check_len(ops.len(), r.len())?;
        check_len(ops.len(), out.len())?;
        match &self.kind {
            Kind::Identity => out.copy_from_slice(r),
            Kind::OneLevel => apply_rasq(ops, self.partition, r, out)?,
            Kind::TwoLevel { coarse, form, order } => {
                apply_two_level(ops, self.partition, coarse, *form, *order, r, out)?
            }
            Kind::Dense { lu, .. } => out.copy_from_slice(&lu.solve(r)?),
            Kind::DenseRas { blocks } => dense::apply_ras_blocks(self.partition, blocks, r, out)?,
        }
        Ok(())
    }
}

/// Two-level application in one of the three supported forms.
pub fn apply_two_level(
    ops: &HeatOperators,
    partition: &TimePartition,
    coarse: &CoarseSpace,
    form: TwoLevelForm,
    order: CoarseOrder,
    r: &[f64],
    out: &mut [f64],
) -> Result<()> {
    check_len(ops.len(), r.len())?;
    check_len(ops.len(), out.len())?;
    match form {
        TwoLevelForm::Literal => {
            let yc = coarse.correction(r)?;
            apply_rasq(ops, partition, &yc, out)
        }
        TwoLevelForm::Additive => {
            apply_rasq(ops, partition, r, out)?;
            coarse.add_correction(r, out)
        }
        TwoLevelForm::Multiplicative => {
            let mut first = vec![0.0; r.len()];
            match order {
                CoarseOrder::CoarseFirst => coarse.add_correction(r, &mut first)?,
                CoarseOrder::FineFirst => apply_rasq(ops, partition, r, &mut first)?,
            }
            let mut resid = vec![0.0; r.len()];
            ops.apply_schur_approx(&first, &mut resid)?;
            for (d, b) in resid.iter_mut().zip(r) {
                *d = b - *d;
            }
            match order {
                CoarseOrder::CoarseFirst => apply_rasq(ops, partition, &resid, out)?,
                CoarseOrder::FineFirst => {
                    out.fill(0.0);
                    coarse.add_correction(&resid, out)?
                }
            }
            for (o, f) in out.iter_mut().zip(&first) {
                *o += f;
            }
            Ok(())
        }
    }
}

/// Dense matrix of any linear map `R^n -> R^n` given as a fallible closure.
pub(crate) fn assemble(n: usize, mut f: impl FnMut(&[f64], &mut [f64]) -> Result<()>) -> Result<DenseMatrix> {
    let mut err = None;
    let m = DenseMatrix::from_operator(n, n, |x, y| {
        if err.is_none() {
            if let Err(e) = f(x, y) {
                err = Some(e);
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(m),
    }
}
