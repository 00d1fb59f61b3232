use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("distance {r} is outside 1..={b}")]
    DistanceOutOfRange { r: usize, b: usize },

    #[error("infeasible environment: no horizon B >= 1 yields a workable link with the requested probability")]
    InfeasibleEnvironment,

    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("ACOE bisection did not converge (|phi(x) - x| = {residual:e})")]
    NonConvergent { residual: f64 },
}

pub(crate) fn check(cond: bool, name: &'static str, value: f64) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}
