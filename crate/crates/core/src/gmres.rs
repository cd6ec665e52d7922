//! Right-preconditioned GMRES (modified Gram-Schmidt Arnoldi, Givens
//! rotations). With right preconditioning the least-squares residual tracked
//! by the rotations is the residual of the original system, so the stopping
//! test needs no extra operator applications.

use crate::config::GmresParams;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2};

#[derive(Debug, Clone, PartialEq)]
pub struct GmresResult {
    pub solution: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Estimated relative residual after each iteration.
    pub residual_history: Vec<f64>,
    /// `||b - A x|| / ||b||`, recomputed from the returned solution.
    pub true_final_relres: f64,
    pub happy_breakdown: bool,
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if b.abs() > a.abs() {
        let t = a / b;
        let s = 1.0 / (1.0 + t * t).sqrt();
        (s * t, s)
    } else {
        let t = b / a;
        let c = 1.0 / (1.0 + t * t).sqrt();
        (c, c * t)
    }
}

/// Solves `A x = b` with right preconditioner `M^{-1}`, starting from `x = 0`.
pub fn gmres_solve<A, M>(mut apply_operator: A, mut apply_preconditioner: M, b: &[f64], params: &GmresParams) -> Result<GmresResult>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    M: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    params.validate()?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(GmresResult {
            solution: vec![0.0; n],
            converged: true,
            iterations: 0,
            residual_history: Vec::new(),
            true_final_relres: 0.0,
            happy_breakdown: false,
        });
    }

    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    let mut total = 0;
    let mut converged = false;
    let mut happy = false;
    let mut z = vec![0.0; n];
    let mut r = b.to_vec();

    while total < params.max_iters && !converged {
        if total > 0 {
            apply_operator(&x, &mut r)?;
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
        }
        let beta = norm2(&r);
        if beta <= params.tol * bnorm {
            converged = true;
            break;
        }
        let cycle = params.restart.unwrap_or(params.max_iters).min(params.max_iters - total);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cycle + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // column j of the Hessenberg matrix, already rotated
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(cycle);
        let mut rotations: Vec<(f64, f64)> = Vec::with_capacity(cycle);
        let mut g = vec![beta];

        for j in 0..cycle {
            let mut w = vec![0.0; n];
            apply_preconditioner(&basis[j], &mut z)?;
            apply_operator(&z, &mut w)?;
            let w_norm0 = norm2(&w);
            let mut h = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot(&w, v);
                axpy(-hij, v, &mut w);
                h.push(hij);
            }
            let h_next = norm2(&w);
            total += 1;
            if !h_next.is_finite() || h.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { iteration: total });
            }
            h.push(h_next);
            for (i, &(c, s)) in rotations.iter().enumerate() {
                let (a, bb) = (h[i], h[i + 1]);
                h[i] = c * a + s * bb;
                h[i + 1] = -s * a + c * bb;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            h[j] = c * h[j] + s * h[j + 1];
            h[j + 1] = 0.0;
            rotations.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            hess.push(h);

            let est = g[j + 1].abs() / bnorm;
            history.push(est);
            if est <= params.tol {
                converged = true;
            }
            if h_next <= params.happy_breakdown_tol * w_norm0.max(f64::MIN_POSITIVE) {
                happy = true;
                converged = true;
            }
            if converged || total >= params.max_iters {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back substitution for the cycle's coefficients
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for jj in i + 1..k {
                s -= hess[jj][i] * y[jj];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (v, yi) in basis.iter().zip(&y) {
            axpy(*yi, v, &mut update);
        }
        apply_preconditioner(&update, &mut z)?;
        axpy(1.0, &z, &mut x);
        if happy {
            break;
        }
    }

    apply_operator(&x, &mut r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let true_final_relres = norm2(&r) / bnorm;
    if !true_final_relres.is_finite() {
        return Err(Error::Divergence { iteration: total });
    }
    Ok(GmresResult {
        solution: x,
        converged,
        iterations: total,
        residual_history: history,
        true_final_relres,
        happy_breakdown: happy,
    })
}
