//! Numerical toolkit for the one-to-three dimensional Schroedinger equation
//! with a critically decaying harmonic potential: fundamental solutions of
//! the classical oscillator, the factorized linear propagator, split-step
//! nonlinear evolution, threshold classification of log-modified
//! nonlinearities, and modified-scattering diagnostics.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod nonlinearity;
pub mod oscillator;
pub mod quad;
pub mod run;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
