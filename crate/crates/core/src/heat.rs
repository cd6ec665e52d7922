//! Discrete heat-equation operators on the space-time grid.
//!
//! Backward Euler in time with the five-point stencil in space gives, for each
//! time step,
//!
//! ```text
//! A u^n - u^{n-1} - dt z^n = 0,    A = I + dt nu K5,
//! ```
//!
//! so `J` is block lower bidiagonal with `A` on the diagonal and `-I` below it,
//! and `L = -dt I` blockwise. `Jhat = J + shift L` keeps the structure of `J`
//! with diagonal block `Ahat = A - shift dt I`, which makes its inverse a plain
//! time-stepping loop.
//!
//! All `apply_*` methods accept any whole number of time-nodes, not only the
//! full horizon: a shorter vector is treated as a window whose first node has
//! no predecessor and whose last node has no successor.

use std::ops::RangeInclusive;

use crate::config::ProblemConfig;
use crate::error::{check_len, Error, Result};
use crate::grid::SpaceTimeLayout;
use crate::linalg::{BandedLu, BandedMatrix};

/// Per-step implicit operator `I + dt nu K5` on the interior unknowns.
pub fn assemble_spatial_operator(config: &ProblemConfig) -> BandedMatrix {
    let (nxi, nyi) = (config.nx_interior(), config.ny_interior());
    let n = nxi * nyi;
    let dt_nu = config.dt() * config.nu;
    let cx = dt_nu / (config.dx() * config.dx());
    let cy = dt_nu / (config.dy() * config.dy());
    let mut a = BandedMatrix::zeros(n, nxi, nxi);
    for j in 0..nyi {
        for i in 0..nxi {
            let k = j * nxi + i;
            a.set(k, k, 1.0 + 2.0 * cx + 2.0 * cy);
            if cx != 0.0 {
                if i > 0 {
                    a.set(k, k - 1, -cx);
                }
                if i + 1 < nxi {
                    a.set(k, k + 1, -cx);
                }
            }
            if cy != 0.0 {
                if j > 0 {
                    a.set(k, k - nxi, -cy);
                }
                if j + 1 < nyi {
                    a.set(k, k + nxi, -cy);
                }
            }
        }
    }
    a
}

#[derive(Debug, Clone)]
pub struct HeatOperators {
    config: ProblemConfig,
    layout: SpaceTimeLayout,
    a: BandedMatrix,
    a_lu: BandedLu,
    ahat: BandedMatrix,
    ahat_lu: BandedLu,
    shift: f64,
    dt: f64,
    mass_scale: f64,
}

impl HeatOperators {
    pub fn new(config: &ProblemConfig) -> Result<Self> {
        Self::with_shift(config, config.jhat_shift())
    }

    /// Builds the operators with an explicit `shift` in `Jhat = J + shift L`.
    pub fn with_shift(config: &ProblemConfig, shift: f64) -> Result<Self> {
        config.validate()?;
        let a = assemble_spatial_operator(config);
        let dt = config.dt();
        let a_lu = BandedLu::factor(&a)?;
        let ahat = a.shifted(-shift * dt);
        let ahat_lu = BandedLu::factor(&ahat)?;
        Ok(Self {
            layout: SpaceTimeLayout::new(config.nt, config.nx_interior(), config.ny_interior()),
            config: config.clone(),
            a,
            a_lu,
            ahat,
            ahat_lu,
            shift,
            dt,
            mass_scale: config.mass_scale(),
        })
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn layout(&self) -> SpaceTimeLayout {
        self.layout
    }

    pub fn n_sp(&self) -> usize {
        self.layout.n_sp()
    }

    pub fn nt(&self) -> usize {
        self.layout.nt
    }

    /// Length of one space-time block.
    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn mass_scale(&self) -> f64 {
        self.mass_scale
    }

    pub fn spatial_operator(&self) -> &BandedMatrix {
        &self.a
    }

    pub fn jhat_diagonal(&self) -> &BandedMatrix {
        &self.ahat
    }

    fn check_window(&self, x: &[f64], out: &[f64]) -> Result<usize> {
        let n_sp = self.n_sp();
        if x.is_empty() || x.len() % n_sp != 0 {
            return Err(Error::Shape {
                expected: self.len(),
                found: x.len(),
            });
        }
        check_len(x.len(), out.len())?;
        Ok(x.len() / n_sp)
    }

    /// `out^n = D x^n - x^{n-1}`
    fn lower_bidiagonal(&self, diag: &BandedMatrix, x: &[f64], out: &mut [f64]) -> Result<()> {
        let nodes = self.check_window(x, out)?;
        let n_sp = self.n_sp();
        for k in 0..nodes {
            let r = k * n_sp..(k + 1) * n_sp;
            diag.matvec_into(&x[r.clone()], &mut out[r.clone()]);
            if k > 0 {
                for (o, p) in out[r].iter_mut().zip(&x[(k - 1) * n_sp..k * n_sp]) {
                    *o -= p;
                }
            }
        }
        Ok(())
    }

    /// `out^n = D^T x^n - x^{n+1}`
    fn upper_bidiagonal(&self, diag: &BandedMatrix, x: &[f64], out: &mut [f64]) -> Result<()> {
        let nodes = self.check_window(x, out)?;
        let n_sp = self.n_sp();
        for k in 0..nodes {
            let r = k * n_sp..(k + 1) * n_sp;
            diag.matvec_transpose_into(&x[r.clone()], &mut out[r.clone()]);
            if k + 1 < nodes {
                for (o, p) in out[r].iter_mut().zip(&x[(k + 1) * n_sp..(k + 2) * n_sp]) {
                    *o -= p;
                }
            }
        }
        Ok(())
    }

    fn scaled_copy(&self, alpha: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_window(x, out)?;
        for (o, v) in out.iter_mut().zip(x) {
            *o = alpha * v;
        }
        Ok(())
    }

    pub fn apply_j(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.lower_bidiagonal(&self.a, u, out)
    }

    pub fn apply_jt(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.upper_bidiagonal(&self.a, w, out)
    }

    pub fn apply_l(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.scaled_copy(-self.dt, z, out)
    }

    pub fn apply_lt(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.scaled_copy(-self.dt, w, out)
    }

    pub fn apply_mu(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.scaled_copy(self.mass_scale, u, out)
    }

    pub fn apply_mu_inv(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.scaled_copy(1.0 / self.mass_scale, u, out)
    }

    pub fn apply_mz(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.scaled_copy(self.mass_scale, z, out)
    }

    pub fn apply_jhat(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.lower_bidiagonal(&self.ahat, x, out)
    }

    pub fn apply_jhat_t(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.upper_bidiagonal(&self.ahat, x, out)
    }

    /// `out = Jhat M_u^{-1} Jhat^T x`, the approximate Schur complement.
    pub fn apply_schur_approx(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut tmp = vec![0.0; x.len()];
        self.apply_jhat_t(x, &mut tmp)?;
        crate::linalg::scale(1.0 / self.mass_scale, &mut tmp);
        self.apply_jhat(&tmp, out)
    }

    fn window_len(&self, window: &RangeInclusive<usize>) -> Result<usize> {
        let (a, b) = (*window.start(), *window.end());
        if a < 1 || b > self.nt() || a > b {
            return Err(Error::Config(format!(
                "window {a}..={b} is not a non-empty range of time-nodes in 1..={}",
                self.nt()
            )));
        }
        Ok((b - a + 1) * self.n_sp())
    }

    /// `Jhat_s^{-1} b` on a contiguous window of time-nodes, with zero state
    /// entering the first node of the window.
    pub fn forward_solve_window(&self, window: RangeInclusive<usize>, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.window_len(&window)?, b.len())?;
        let mut x = b.to_vec();
        self.forward_solve_in_place(&mut x);
        Ok(x)
    }

    /// `Jhat_s^{-T} b` on a contiguous window, integrating backwards from a
    /// zero terminal state after the last node.
    pub fn adjoint_solve_window(&self, window: RangeInclusive<usize>, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.window_len(&window)?, b.len())?;
        let mut x = b.to_vec();
        self.adjoint_solve_in_place(&mut x);
        Ok(x)
    }

    /// Forward time stepping `x^n = Ahat^{-1} (b^n + x^{n-1})` over however
    /// many nodes `x` holds.
    pub fn forward_solve_in_place(&self, x: &mut [f64]) {
        time_step_forward(&self.ahat_lu, self.n_sp(), x);
    }

    /// Backward time stepping `x^n = Ahat^{-T} (b^n + x^{n+1})`.
    pub fn adjoint_solve_in_place(&self, x: &mut [f64]) {
        let n_sp = self.n_sp();
        let nodes = x.len() / n_sp;
        for k in (0..nodes).rev() {
            let (head, tail) = x.split_at_mut((k + 1) * n_sp);
            let cur = &mut head[k * n_sp..];
            if k + 1 < nodes {
                for (c, nxt) in cur.iter_mut().zip(&tail[..n_sp]) {
                    *c += nxt;
                }
            }
            self.ahat_lu.solve_transpose_in_place(cur);
        }
    }

    /// `J^{-1} f`: runs the state equation forward with the given sources.
    pub fn solve_state(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), f.len())?;
        let mut x = f.to_vec();
        time_step_forward(&self.a_lu, self.n_sp(), &mut x);
        Ok(x)
    }
}

fn time_step_forward(lu: &BandedLu, n_sp: usize, x: &mut [f64]) {
    let nodes = x.len() / n_sp;
    for k in 0..nodes {
        let (head, cur) = x.split_at_mut(k * n_sp);
        let cur = &mut cur[..n_sp];
        if k > 0 {
            for (c, prev) in cur.iter_mut().zip(&head[(k - 1) * n_sp..]) {
                *c += prev;
            }
        }
        lu.solve_in_place(cur);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, max_abs_diff, DenseLu, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(nt: usize, nx: usize, ny: usize) -> ProblemConfig {
        ProblemConfig {
            nt,
            nx,
            ny,
            nd: 1,
            omega: 1e-2,
            ..Default::default()
        }
    }

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn no_conduction_gives_identity() {
        let c = ProblemConfig { nu: 0.0, ..config(4, 4, 4) };
        assert_eq!(assemble_spatial_operator(&c).to_dense(), DenseMatrix::identity(9));
    }

    #[test]
    fn single_interior_unknown() {
        // dx = 0.5, dy = 1, dt = 0.1: 1 + 0.1 (2/0.25 + 2/1) = 2
        let c = ProblemConfig {
            nt: 10,
            ..config(10, 2, 2)
        };
        let a = assemble_spatial_operator(&c);
        assert_eq!(a.dim(), 1);
        assert!((a.get(0, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn three_by_three_matches_hand_assembly() {
        let c = config(5, 4, 4);
        let (cx, cy) = (0.2 * 16.0, 0.2 * 4.0);
        let mut d = DenseMatrix::zeros(9, 9);
        for j in 0..3usize {
            for i in 0..3usize {
                let k = 3 * j + i;
                d[(k, k)] = 1.0 + 2.0 * cx + 2.0 * cy;
                if i > 0 {
                    d[(k, k - 1)] = -cx;
                }
                if i < 2 {
                    d[(k, k + 1)] = -cx;
                }
                if j > 0 {
                    d[(k, k - 3)] = -cy;
                }
                if j < 2 {
                    d[(k, k + 3)] = -cy;
                }
            }
        }
        let a = assemble_spatial_operator(&c).to_dense();
        assert!(a.max_abs_diff(&d) < 1e-13);
    }

    #[test]
    fn apply_j_single_unknown() {
        let ops = HeatOperators::new(&config(3, 2, 2)).unwrap();
        let a = ops.spatial_operator().get(0, 0);
        let u = [1.0, 2.0, 3.0];
        let mut out = [0.0; 3];
        ops.apply_j(&u, &mut out).unwrap();
        let expected = [a * 1.0, a * 2.0 - 1.0, a * 3.0 - 2.0];
        assert!(max_abs_diff(&out, &expected) < 1e-14);
        ops.apply_j(&[0.0; 3], &mut out).unwrap();
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn adjoint_pairings() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ops = HeatOperators::new(&config(6, 4, 5)).unwrap();
        let n = ops.len();
        type Pair = (
            fn(&HeatOperators, &[f64], &mut [f64]) -> Result<()>,
            fn(&HeatOperators, &[f64], &mut [f64]) -> Result<()>,
        );
        let pairs: [Pair; 3] = [
            (HeatOperators::apply_j, HeatOperators::apply_jt),
            (HeatOperators::apply_l, HeatOperators::apply_lt),
            (HeatOperators::apply_jhat, HeatOperators::apply_jhat_t),
        ];
        for _ in 0..100 {
            let x = random(&mut rng, n);
            let y = random(&mut rng, n);
            for (f, ft) in pairs {
                let (mut fx, mut fty) = (vec![0.0; n], vec![0.0; n]);
                f(&ops, &x, &mut fx).unwrap();
                ft(&ops, &y, &mut fty).unwrap();
                let (l, r) = (dot(&fx, &y), dot(&x, &fty));
                assert!((l - r).abs() <= 1e-13 * l.abs().max(r.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn jhat_is_j_plus_shifted_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ops = HeatOperators::new(&config(5, 4, 4)).unwrap();
        let n = ops.len();
        let x = random(&mut rng, n);
        let (mut j, mut l, mut jh) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        ops.apply_j(&x, &mut j).unwrap();
        ops.apply_l(&x, &mut l).unwrap();
        ops.apply_jhat(&x, &mut jh).unwrap();
        for k in 0..n {
            let v = j[k] + ops.shift() * l[k];
            assert!((v - jh[k]).abs() <= 1e-14 * v.abs().max(1.0));
        }
    }

    #[test]
    fn zero_shift_gives_j() {
        let ops = HeatOperators::with_shift(&config(3, 4, 4), 0.0).unwrap();
        assert_eq!(ops.jhat_diagonal(), ops.spatial_operator());
    }

    #[test]
    fn forward_solve_inverts_jhat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ops = HeatOperators::new(&config(4, 4, 4)).unwrap();
        let b = random(&mut rng, ops.len());
        let x = ops.forward_solve_window(1..=4, &b).unwrap();
        let mut r = vec![0.0; b.len()];
        ops.apply_jhat(&x, &mut r).unwrap();
        assert!(max_abs_diff(&r, &b) <= 1e-10 * b.iter().fold(0.0f64, |m, v| m.max(v.abs())));

        let one = ops.forward_solve_window(2..=2, &b[..9]).unwrap();
        let direct = DenseLu::factor(&ops.jhat_diagonal().to_dense()).unwrap().solve(&b[..9]).unwrap();
        assert!(max_abs_diff(&one, &direct) < 1e-13);

        assert_eq!(ops.forward_solve_window(1..=2, &[0.0; 18]).unwrap(), vec![0.0; 18]);
        assert_eq!(ops.adjoint_solve_window(1..=2, &[0.0; 18]).unwrap(), vec![0.0; 18]);
    }

    #[test]
    fn solve_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ops = HeatOperators::new(&config(7, 5, 4)).unwrap();
        for _ in 0..20 {
            let b = random(&mut rng, ops.len());
            let c = random(&mut rng, ops.len());
            let fb = ops.forward_solve_window(1..=7, &b).unwrap();
            let ac = ops.adjoint_solve_window(1..=7, &c).unwrap();
            let (l, r) = (dot(&fb, &c), dot(&b, &ac));
            assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(1.0));
        }
    }

    #[test]
    fn window_solves_match_dense_triangular_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ops = HeatOperators::new(&config(5, 3, 3)).unwrap();
        let n = ops.len();
        let jhat = DenseMatrix::from_operator(n, n, |x, y| ops.apply_jhat(x, y).unwrap());
        let lu = DenseLu::factor(&jhat).unwrap();
        let b = random(&mut rng, n);
        let fwd = ops.forward_solve_window(1..=5, &b).unwrap();
        let adj = ops.adjoint_solve_window(1..=5, &b).unwrap();
        let scale = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let dense_fwd = lu.solve(&b).unwrap();
        let dense_adj = lu.solve_transpose(&b).unwrap();
        assert!(max_abs_diff(&fwd, &dense_fwd) <= 1e-10 * scale(&dense_fwd));
        assert!(max_abs_diff(&adj, &dense_adj) <= 1e-10 * scale(&dense_adj));

        // a window of nodes 2..=4 is the leading 3x3 block system of Jhat
        let sub: Vec<usize> = (4..16).collect();
        let jhat_s = jhat.select(&sub, &sub);
        let bw = &b[4..16];
        let w = ops.adjoint_solve_window(2..=4, bw).unwrap();
        let expected = DenseLu::factor(&jhat_s).unwrap().solve_transpose(bw).unwrap();
        assert!(max_abs_diff(&w, &expected) <= 1e-10 * scale(&expected));
    }

    #[test]
    fn shape_errors() {
        let ops = HeatOperators::new(&config(3, 3, 3)).unwrap();
        let mut out = vec![0.0; 12];
        assert!(matches!(ops.apply_j(&[0.0; 12], &mut out[..11]), Err(Error::Shape { .. })));
        assert!(matches!(ops.apply_j(&[0.0; 5], &mut out[..5]), Err(Error::Shape { .. })));
        assert!(ops.forward_solve_window(0..=1, &[0.0; 8]).is_err());
        assert!(ops.forward_solve_window(1..=2, &[0.0; 4]).is_err());
    }
}
