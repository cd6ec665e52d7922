//! Space-time KKT systems for the heat-equation constrained quadratic control
//! problem, solved with right-preconditioned GMRES and a block-diagonal
//! preconditioner whose Schur block is approximated by restricted additive
//! Schwarz in time (one level) or with a Nicolaides coarse correction (two
//! levels).
//!
//! Time-nodes are numbered `1..=nt`; node 0 carries the initial condition and
//! is never an unknown. Subdomain indices are zero-based.

pub mod config;
pub mod error;
pub mod experiment;
pub mod gmres;
pub mod grid;
pub mod heat;
pub mod kkt;
pub mod linalg;
pub mod schur;

pub use config::{
    CoarseOrder, CoarseVariant, GmresParams, JhatSign, PrecondKind, ProblemConfig, TieBreak,
    TwoLevelForm,
};
pub use error::{Error, Result};
pub use gmres::{gmres_solve, GmresResult};
pub use grid::{SpaceTimeLayout, TimePartition};
pub use heat::HeatOperators;
pub use kkt::{KktVector, RhsBundle};
pub use schur::{CoarseSpace, SchurSolver};
