use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("quadrature did not converge: best {best}, error estimate {estimate:e}")]
    Convergence { best: Complex64, estimate: f64 },
    #[error("Newton iteration failed: {0}")]
    Newton(String),
    #[error("turning point is not simple: |v'(z0)| = {0:e}")]
    NotSimple(f64),
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("split inconsistency: residual {residual:e} exceeds {bound:e}")]
    Inconsistency { residual: f64, bound: f64 },
    #[error("structural zero violated: {name} = {value:e} (scale {scale:e})")]
    StructuralZero { name: String, value: f64, scale: f64 },
    #[error("level curve stagnated at {0}")]
    Stagnation(Complex64),
    #[error("pole at distance {0:e}")]
    Pole(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("iteration diverged: contraction ratio {0}")]
    Divergence(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
