//! Simulation, compilation, and benchmarking toolkit for adiabatic quantum computation.
//!
//! Exact numerics at desk scale: operator algebra on qubit registers, low-lying spectra and
//! gap profiles, Schrödinger propagation along schedules, rigorous adiabatic bounds, a problem
//! zoo with analytic gap oracles, a history-state circuit compiler, perturbative gadgets,
//! spectral transforms, and a simulated-annealing baseline.

pub mod annealer;
pub mod bounds;
pub mod compiler;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod gadgets;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod spectra;
pub mod transforms;

pub use error::{Error, Result};
