//! Simulation of hybrid stochastic systems with path-dependent switching.
//!
//! A trajectory `Y = (J, X)` couples a discrete mode `J` with a Euclidean state
//! `X`. Mode changes are generated by thinning a single master Poisson process of
//! rate `lambda`; between candidate times `X` is advanced by a mode-specific
//! micro-solver driven by a shared noise tape.

pub mod config;
pub mod engine;
pub mod error;
pub mod functionals;
pub mod io;
pub mod kernel;
pub mod lab;
pub mod micro;
pub mod noise;
pub mod path;
pub mod scenarios;
pub mod stats;

/// Discrete mode label.
pub type Mode = i64;

pub use error::{Result, SimError};
