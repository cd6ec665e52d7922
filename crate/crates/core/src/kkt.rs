//! The KKT system of the discrete control problem,
//!
//! ```text
//! [ M_u        J^T ] [u]   [f_u]
//! [     w M_z  L^T ] [z] = [ 0 ]
//! [ J    L         ] [w]   [ f ]
//! ```
//!
//! with the block-diagonal preconditioner `diag(M_u, w M_z, S~)`.

use crate::error::{check_len, Result};
use crate::heat::HeatOperators;
use crate::linalg::{norm2, scale};
use crate::schur::SchurSolver;

/// State, control and adjoint blocks stored back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct KktVector {
    block: usize,
    data: Vec<f64>,
}

impl KktVector {
    pub fn zeros(block: usize) -> Self {
        Self {
            block,
            data: vec![0.0; 3 * block],
        }
    }

    pub fn from_blocks(u: &[f64], z: &[f64], w: &[f64]) -> Result<Self> {
        check_len(u.len(), z.len())?;
        check_len(u.len(), w.len())?;
        let mut data = Vec::with_capacity(3 * u.len());
        data.extend_from_slice(u);
        data.extend_from_slice(z);
        data.extend_from_slice(w);
        Ok(Self {
            block: u.len(),
            data,
        })
    }

    pub fn from_flat(block: usize, data: Vec<f64>) -> Result<Self> {
        check_len(3 * block, data.len())?;
        Ok(Self { block, data })
    }

    pub fn block_len(&self) -> usize {
        self.block
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn u(&self) -> &[f64] {
        &self.data[..self.block]
    }

    pub fn z(&self) -> &[f64] {
        &self.data[self.block..2 * self.block]
    }

    pub fn w(&self) -> &[f64] {
        &self.data[2 * self.block..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhsBundle {
    pub f_u: Vec<f64>,
    pub f_z: Vec<f64>,
    pub f: Vec<f64>,
}

impl RhsBundle {
    pub fn to_kkt(&self) -> KktVector {
        KktVector::from_blocks(&self.f_u, &self.f_z, &self.f).expect("blocks share one layout")
    }

    /// Samples `target` at every interior point and time-node `t_n = n dt`.
    pub fn target_samples(ops: &HeatOperators, target: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let c = ops.config();
        let (dx, dy, dt) = (c.dx(), c.dy(), c.dt());
        let layout = ops.layout();
        let mut out = vec![0.0; layout.len()];
        for n in 1..=layout.nt {
            for j in 1..=layout.ny_interior {
                for i in 1..=layout.nx_interior {
                    out[layout.idx(n, i, j)] = target(i as f64 * dx, j as f64 * dy, n as f64 * dt);
                }
            }
        }
        out
    }
}

/// `f_u = M_u * target`, `f_z = 0`, and the initial condition on node 1 of `f`.
pub fn assemble_rhs(
    ops: &HeatOperators,
    u0: impl Fn(f64, f64) -> f64,
    target: impl Fn(f64, f64, f64) -> f64,
) -> RhsBundle {
    let c = ops.config();
    let layout = ops.layout();
    let mut f_u = RhsBundle::target_samples(ops, target);
    scale(ops.mass_scale(), &mut f_u);
    let mut f = vec![0.0; layout.len()];
    for j in 1..=layout.ny_interior {
        for i in 1..=layout.nx_interior {
            f[layout.idx(1, i, j)] = u0(i as f64 * c.dx(), j as f64 * c.dy());
        }
    }
    RhsBundle {
        f_u,
        f_z: vec![0.0; layout.len()],
        f,
    }
}

/// Initial condition `-x y (x - 1)(y - 2)`.
pub fn default_initial_condition(x: f64, y: f64) -> f64 {
    -x * y * (x - 1.0) * (y - 2.0)
}

/// Target `sin(2 pi t) sin(2 pi x) sin(2 pi y)`.
pub fn default_target(x: f64, y: f64, t: f64) -> f64 {
    use std::f64::consts::PI;
    (2.0 * PI * t).sin() * (2.0 * PI * x).sin() * (2.0 * PI * y).sin()
}

/// `out = K v`.
pub fn apply_k(ops: &HeatOperators, v: &[f64], out: &mut [f64]) -> Result<()> {
    let n = ops.len();
    check_len(3 * n, v.len())?;
    check_len(3 * n, out.len())?;
    let (u, rest) = v.split_at(n);
    let (z, w) = rest.split_at(n);
    let (ou, rest) = out.split_at_mut(n);
    let (oz, ow) = rest.split_at_mut(n);
    let omega = ops.config().omega;
    let m = ops.mass_scale();

    ops.apply_jt(w, ou)?;
    for (o, x) in ou.iter_mut().zip(u) {
        *o += m * x;
    }
    ops.apply_lt(w, oz)?;
    for (o, x) in oz.iter_mut().zip(z) {
        *o += omega * m * x;
    }
    ops.apply_j(u, ow)?;
    let dt = ops.dt();
    for (o, x) in ow.iter_mut().zip(z) {
        *o -= dt * x;
    }
    Ok(())
}

/// `out = P^{-1} r` with the Schur block replaced by `schur`.
pub fn apply_p_inv(ops: &HeatOperators, schur: &SchurSolver<'_>, r: &[f64], out: &mut [f64]) -> Result<()> {
    let n = ops.len();
    check_len(3 * n, r.len())?;
    check_len(3 * n, out.len())?;
    let m = ops.mass_scale();
    let omega = ops.config().omega;
    for k in 0..n {
        out[k] = r[k] / m;
        out[n + k] = r[n + k] / (omega * m);
    }
    schur.apply_into(&r[2 * n..], &mut out[2 * n..])
}

/// Discrete objective with the lumped-mass quadrature over nodes `1..=nt`.
pub fn evaluate_objective(ops: &HeatOperators, u: &[f64], z: &[f64], target: &[f64]) -> Result<f64> {
    let n = ops.len();
    check_len(n, u.len())?;
    check_len(n, z.len())?;
    check_len(n, target.len())?;
    let m = ops.mass_scale();
    let misfit: f64 = u.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    let control: f64 = z.iter().map(|v| v * v).sum();
    Ok(0.5 * m * misfit + 0.5 * ops.config().omega * m * control)
}

/// Objective of the uncontrolled trajectory, `u = J^{-1} f` with `z = 0`.
pub fn zero_control_objective(ops: &HeatOperators, rhs: &RhsBundle, target: &[f64]) -> Result<f64> {
    let u = ops.solve_state(&rhs.f)?;
    evaluate_objective(ops, &u, &vec![0.0; ops.len()], target)
}

/// `||rhs - K v|| / ||rhs||`, or the absolute residual norm when `rhs = 0`.
pub fn kkt_residual(ops: &HeatOperators, v: &[f64], rhs: &[f64]) -> Result<f64> {
    check_len(rhs.len(), v.len())?;
    let mut kv = vec![0.0; v.len()];
    apply_k(ops, v, &mut kv)?;
    for (k, b) in kv.iter_mut().zip(rhs) {
        *k = b - *k;
    }
    let r = norm2(&kv);
    let b = norm2(rhs);
    Ok(if b > 0.0 { r / b } else { r })
}

/// `||J u + L z - f|| / ||f||`.
pub fn constraint_residual(ops: &HeatOperators, u: &[f64], z: &[f64], f: &[f64]) -> Result<f64> {
    let n = ops.len();
    check_len(n, f.len())?;
    let mut r = vec![0.0; n];
    ops.apply_j(u, &mut r)?;
    let dt = ops.dt();
    for k in 0..n {
        r[k] = f[k] - (r[k] - dt * z[k]);
    }
    let b = norm2(f);
    Ok(if b > 0.0 { norm2(&r) / b } else { norm2(&r) })
}
