//! Space-time indexing and the decomposition of the time axis into
//! overlapping subdomains.
//!
//! Vectors are stored time-major: all interior spatial unknowns of time-node 1,
//! then of time-node 2, and so on. Within a node the ordering is row-major with
//! `j` (the y index) outer and `i` (the x index) inner. Because every node is a
//! contiguous block, gathering a set of time-nodes is a sequence of slice
//! copies.
//!
//! Subdomain `s` (zero-based) with `m = nt / nd` steps holds the time-nodes
//! `1..=m` for `s = 0` and `s*m..=(s+1)*m` otherwise, so neighbours share one
//! node but no time step. The extended window adds the node just before the
//! first one when it is not the eliminated initial condition.

use std::ops::RangeInclusive;

use crate::config::TieBreak;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceTimeLayout {
    pub nt: usize,
    pub nx_interior: usize,
    pub ny_interior: usize,
}

impl SpaceTimeLayout {
    pub fn new(nt: usize, nx_interior: usize, ny_interior: usize) -> Self {
        Self {
            nt,
            nx_interior,
            ny_interior,
        }
    }

    pub fn n_sp(&self) -> usize {
        self.nx_interior * self.ny_interior
    }

    pub fn len(&self) -> usize {
        self.nt * self.n_sp()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of interior point `(i, j)` at time-node `n`, all one-based.
    pub fn idx(&self, n: usize, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.nt).contains(&n));
        debug_assert!((1..=self.nx_interior).contains(&i));
        debug_assert!((1..=self.ny_interior).contains(&j));
        (n - 1) * self.n_sp() + (j - 1) * self.nx_interior + (i - 1)
    }

    /// Range of flat indices belonging to time-node `n`.
    pub fn node_range(&self, n: usize) -> std::ops::Range<usize> {
        let n_sp = self.n_sp();
        (n - 1) * n_sp..n * n_sp
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimePartition {
    nt: usize,
    nd: usize,
    m: usize,
    n_sp: usize,
    /// Owning subdomain of each time-node; index 0 is unused.
    owner: Vec<usize>,
    tie_break: TieBreak,
}

impl TimePartition {
    pub fn new(nt: usize, nd: usize, n_sp: usize) -> Result<Self> {
        Self::with_tie_break(nt, nd, n_sp, TieBreak::Earlier)
    }

    pub fn with_tie_break(nt: usize, nd: usize, n_sp: usize, tie_break: TieBreak) -> Result<Self> {
        if nd == 0 || nt == 0 {
            return Err(Error::Config(format!(
                "time partition needs nt >= 1 and nd >= 1, got nt={nt} nd={nd}"
            )));
        }
        if nt % nd != 0 {
            return Err(Error::Indivisible { nt, nd });
        }
        let m = nt / nd;
        if tie_break == TieBreak::Later && m == 1 && nd > 1 {
            // subdomain 0 would own no node at all
            return Err(Error::Config(
                "the later tie-break needs at least two steps per subdomain".into(),
            ));
        }
        let mut owner = vec![usize::MAX; nt + 1];
        for (n, o) in owner.iter_mut().enumerate().skip(1) {
            *o = match tie_break {
                // shared node s*m goes to subdomain s-1
                TieBreak::Earlier => (n - 1) / m,
                // shared node s*m goes to subdomain s
                TieBreak::Later => (n / m).min(nd - 1),
            };
        }
        Ok(Self {
            nt,
            nd,
            m,
            n_sp,
            owner,
            tie_break,
        })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nd(&self) -> usize {
        self.nd
    }

    pub fn steps_per_subdomain(&self) -> usize {
        self.m
    }

    pub fn n_sp(&self) -> usize {
        self.n_sp
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    /// Time-nodes of subdomain `s`.
    pub fn nodes(&self, s: usize) -> RangeInclusive<usize> {
        assert!(s < self.nd, "subdomain {s} out of range (nd = {})", self.nd);
        if s == 0 {
            1..=self.m
        } else {
            s * self.m..=(s + 1) * self.m
        }
    }

    /// Number of time-nodes in subdomain `s`.
    pub fn node_count(&self, s: usize) -> usize {
        let r = self.nodes(s);
        r.end() - r.start() + 1
    }

    /// The node one step before subdomain `s`, if it is an unknown.
    pub fn w_node(&self, s: usize) -> Option<usize> {
        let first = *self.nodes(s).start();
        (first >= 2).then(|| first - 1)
    }

    /// Time-nodes of the extended window of subdomain `s`.
    pub fn extended_nodes(&self, s: usize) -> RangeInclusive<usize> {
        let r = self.nodes(s);
        match self.w_node(s) {
            Some(w) => w..=*r.end(),
            None => r,
        }
    }

    pub fn owner(&self, n: usize) -> usize {
        assert!((1..=self.nt).contains(&n), "time-node {n} out of range");
        self.owner[n]
    }

    pub fn owns(&self, s: usize, n: usize) -> bool {
        self.owner(n) == s
    }

    /// Time-nodes owned by subdomain `s`; always a contiguous range.
    pub fn owned_nodes(&self, s: usize) -> RangeInclusive<usize> {
        let r = self.nodes(s);
        let first = r.clone().find(|&n| self.owns(s, n)).expect("every subdomain owns a node");
        let last = r.rev().find(|&n| self.owns(s, n)).expect("every subdomain owns a node");
        first..=last
    }

    fn global_len(&self) -> usize {
        self.nt * self.n_sp
    }

    fn gather(&self, nodes: RangeInclusive<usize>, v: &[f64]) -> Vec<f64> {
        let n_sp = self.n_sp;
        let (a, b) = (*nodes.start(), *nodes.end());
        v[(a - 1) * n_sp..b * n_sp].to_vec()
    }

    fn scatter(&self, nodes: RangeInclusive<usize>, local: &[f64]) -> Vec<f64> {
        let n_sp = self.n_sp;
        let (a, b) = (*nodes.start(), *nodes.end());
        let mut out = vec![0.0; self.global_len()];
        out[(a - 1) * n_sp..b * n_sp].copy_from_slice(local);
        out
    }

    fn local_len(&self, nodes: &RangeInclusive<usize>) -> usize {
        (nodes.end() - nodes.start() + 1) * self.n_sp
    }

    /// `R_s v`: the values of `v` on the nodes of subdomain `s`.
    pub fn restrict(&self, s: usize, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.global_len(), v.len())?;
        Ok(self.gather(self.nodes(s), v))
    }

    /// `R_s^T x`: zero outside subdomain `s`.
    pub fn prolong(&self, s: usize, local: &[f64]) -> Result<Vec<f64>> {
        let nodes = self.nodes(s);
        check_len(self.local_len(&nodes), local.len())?;
        Ok(self.scatter(nodes, local))
    }

    /// `Q_s v`: the values of `v` on the extended window of subdomain `s`.
    pub fn restrict_extended(&self, s: usize, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.global_len(), v.len())?;
        Ok(self.gather(self.extended_nodes(s), v))
    }

    /// `Q_s^T x`: zero outside the extended window of subdomain `s`.
    pub fn prolong_extended(&self, s: usize, local: &[f64]) -> Result<Vec<f64>> {
        let nodes = self.extended_nodes(s);
        check_len(self.local_len(&nodes), local.len())?;
        Ok(self.scatter(nodes, local))
    }

    /// `D_s x` for a subdomain-local vector: zeroes nodes `s` does not own.
    pub fn apply_ownership_mask(&self, s: usize, local: &mut [f64]) -> Result<()> {
        let nodes = self.nodes(s);
        check_len(self.local_len(&nodes), local.len())?;
        let n_sp = self.n_sp;
        for (k, n) in nodes.enumerate() {
            if !self.owns(s, n) {
                local[k * n_sp..(k + 1) * n_sp].fill(0.0);
            }
        }
        Ok(())
    }

    /// Adds `D_s x` into a global vector without allocating.
    pub(crate) fn add_owned(&self, s: usize, local: &[f64], out: &mut [f64]) {
        let n_sp = self.n_sp;
        let first = *self.nodes(s).start();
        for n in self.owned_nodes(s) {
            let k = n - first;
            let dst = &mut out[(n - 1) * n_sp..n * n_sp];
            for (d, x) in dst.iter_mut().zip(&local[k * n_sp..(k + 1) * n_sp]) {
                *d += x;
            }
        }
    }
}
