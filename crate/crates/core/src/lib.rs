//! Uniform Airy-type asymptotic solutions of the difference equation
//! `ψ(z+h) + ψ(z−h) + v(z) ψ(z) = 0` near a simple turning point.

pub mod airy;
pub mod analytic;
pub mod config;
pub mod dd;
pub mod error;
pub mod exact;
pub mod fit;
pub mod momentum;
pub mod parallel;
pub mod parametrix;
pub mod potential;
pub mod precise;
pub mod scaled;
pub mod series;
pub mod stokes;
pub mod suites;
pub mod taylor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
