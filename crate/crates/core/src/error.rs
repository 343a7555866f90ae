use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("empty input")]
    Empty,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! arg_err {
    ($($t:tt)*) => { $crate::error::Error::Argument(alloc::format!($($t)*)) };
}
pub(crate) use arg_err;
