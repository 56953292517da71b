//! Pseudo-spectral simulator for two-phase Brinkman flow coupled to a
//! sixth-order Cahn–Hilliard equation with a Willmore-type curvature energy.
//!
//! The computational box is periodic. Fields are real samples on a uniform
//! grid with Fourier coefficients normalized as
//! `f(x) = Σ_k c_k exp(i k·x)`, `c_k = N⁻¹ Σ_x f(x) exp(-i k·x)`, so that
//! `∫ |f|² = |Ω| Σ_k |c_k|²` (Parseval).

pub mod config;
pub mod energetics;
pub mod error;
pub mod evolution;
pub mod flow;
pub mod forcing;
pub mod harness;
pub mod io;
pub mod model;
pub mod runner;
pub mod spectral;

pub use error::{ConfigIssue, Error, Result};
