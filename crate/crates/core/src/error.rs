use thiserror::Error;

/// Errors raised by the numeric routines, loaders and generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("generator diverged at variate {variate}, step {step}: |x| = {value:e}")]
    Diverged {
        variate: usize,
        step: usize,
        value: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(what()))
    }
}
