use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("number of time steps {nt} is not divisible by the number of subdomains {nd}")]
    Indivisible { nt: usize, nd: usize },

    #[error("shape mismatch: expected length {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("matrix is singular to working precision (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("coarse operator for the {variant} coarse space is rank deficient")]
    RankDeficientCoarse { variant: &'static str },

    #[error("GMRES produced a non-finite value at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
