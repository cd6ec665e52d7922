//! Problem and solver configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} '{}' (expected one of: {})",
                        stringify!($name),
                        other,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

string_enum!(
    /// Which approximation of the Schur block the preconditioner uses.
    PrecondKind {
        None => "none",
        OneLevel => "one-level",
        TwoLevel => "two-level",
        DenseSchur => "dense-schur",
        TrueSchur => "true-schur",
    }
);

string_enum!(
    /// Spatial lifting of the temporal coarse profiles.
    CoarseVariant {
        Scalar => "scalar",
        PerDof => "per-dof",
    }
);

string_enum!(
    /// How the coarse correction is combined with the one-level sweep.
    TwoLevelForm {
        Literal => "literal",
        Multiplicative => "multiplicative",
        Additive => "additive",
    }
);

string_enum!(
    /// Sign of the regularization shift in `Jhat = J ± omega^(-1/2) L`.
    JhatSign {
        Plus => "plus",
        Minus => "minus",
    }
);

string_enum!(
    /// Order of the coarse and fine corrections in the multiplicative form.
    CoarseOrder {
        CoarseFirst => "coarse-first",
        FineFirst => "fine-first",
    }
);

string_enum!(
    /// Which subdomain owns a time-node shared by two neighbours.
    TieBreak {
        Earlier => "earlier",
        Later => "later",
    }
);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresParams {
    pub tol: f64,
    pub max_iters: usize,
    pub restart: Option<usize>,
    pub happy_breakdown_tol: f64,
}

impl Default for GmresParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 420,
            restart: None,
            happy_breakdown_tol: 1e-14,
        }
    }
}

impl GmresParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.restart == Some(0) {
            return Err(Error::Config("restart length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Continuous and discrete parameters of one solve.
///
/// `nx`, `ny` count mesh intervals, so the grid has `nx + 1` by `ny + 1`
/// points and `(nx - 1) * (ny - 1)` interior unknowns per time-node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub lx: f64,
    pub ly: f64,
    pub t_final: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub nu: f64,
    pub omega: f64,
    pub nd: usize,
    pub precond: PrecondKind,
    pub coarse_variant: CoarseVariant,
    pub two_level_form: TwoLevelForm,
    pub coarse_order: CoarseOrder,
    /// `plus` can leave the diagonal blocks of `Jhat` indefinite for small
    /// `omega`, so the default is `minus`.
    pub jhat_sign: JhatSign,
    pub tie_break: TieBreak,
    pub gmres: GmresParams,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            lx: 1.0,
            ly: 2.0,
            t_final: 1.0,
            nx: 16,
            ny: 16,
            nt: 100,
            nu: 1.0,
            omega: 1e-3,
            nd: 5,
            precond: PrecondKind::TwoLevel,
            coarse_variant: CoarseVariant::PerDof,
            two_level_form: TwoLevelForm::Multiplicative,
            coarse_order: CoarseOrder::FineFirst,
            jhat_sign: JhatSign::Minus,
            tie_break: TieBreak::Earlier,
            gmres: GmresParams::default(),
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::Config(format!(
                "nx and ny must be at least 2, got nx={} ny={}",
                self.nx, self.ny
            )));
        }
        if self.nt == 0 {
            return Err(Error::Config("nt must be at least 1".into()));
        }
        if self.nd == 0 {
            return Err(Error::Config("nd must be at least 1".into()));
        }
        if self.nt % self.nd != 0 {
            return Err(Error::Indivisible {
                nt: self.nt,
                nd: self.nd,
            });
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Config(format!(
                "omega must be positive and finite, got {}",
                self.omega
            )));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::Config(format!("nu must be non-negative, got {}", self.nu)));
        }
        for (name, v) in [("lx", self.lx), ("ly", self.ly), ("t_final", self.t_final)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        self.gmres.validate()
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    /// Interior points along x.
    pub fn nx_interior(&self) -> usize {
        self.nx - 1
    }

    /// Interior points along y.
    pub fn ny_interior(&self) -> usize {
        self.ny - 1
    }

    /// Spatial unknowns per time-node.
    pub fn n_sp(&self) -> usize {
        self.nx_interior() * self.ny_interior()
    }

    pub fn steps_per_subdomain(&self) -> usize {
        self.nt / self.nd
    }

    /// Diagonal value of both mass matrices, `dt * dx * dy`.
    pub fn mass_scale(&self) -> f64 {
        self.dt() * self.dx() * self.dy()
    }

    /// Signed shift multiplying `L` in `Jhat = J + shift * L`.
    pub fn jhat_shift(&self) -> f64 {
        let s = match self.jhat_sign {
            JhatSign::Plus => 1.0,
            JhatSign::Minus => -1.0,
        };
        s / self.omega.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ProblemConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_sp(), 225);
        assert_eq!(c.dx(), 1.0 / 16.0);
        assert_eq!(c.dy(), 2.0 / 16.0);
        assert_eq!(c.dt(), 0.01);
    }

    #[test]
    fn rejects_indivisible_partition() {
        let c = ProblemConfig {
            nt: 10,
            nd: 3,
            ..Default::default()
        };
        match c.validate() {
            Err(Error::Indivisible { nt: 10, nd: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_scalars() {
        for c in [
            ProblemConfig { omega: 0.0, ..Default::default() },
            ProblemConfig { nu: -1.0, ..Default::default() },
            ProblemConfig { nx: 1, ..Default::default() },
            ProblemConfig { nd: 0, ..Default::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn enum_text_round_trip() {
        for k in PrecondKind::ALL {
            assert_eq!(k.as_str().parse::<PrecondKind>().unwrap(), *k);
        }
        assert!("two_level".parse::<PrecondKind>().is_err());
        assert_eq!(CoarseVariant::PerDof.to_string(), "per-dof");
    }

    #[test]
    fn shift_sign() {
        let mut c = ProblemConfig {
            omega: 1e-4,
            ..Default::default()
        };
        c.jhat_sign = JhatSign::Plus;
        assert!((c.jhat_shift() - 100.0).abs() < 1e-12);
        c.jhat_sign = JhatSign::Minus;
        assert!((c.jhat_shift() + 100.0).abs() < 1e-12);
    }
}
