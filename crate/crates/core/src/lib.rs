//! Simulated-bifurcation Ising machines, a simulated-annealing baseline, and a
//! QUBO formulation of charged-particle track finding.
//!
//! The crate is organised bottom-up:
//!
//! * [`ising`] holds the QUBO and Ising problem types, energy evaluation,
//!   the 0/1 to ±1 conversion and an exhaustive oracle for small instances.
//! * [`solvers`] implements ballistic, discrete and adiabatic simulated
//!   bifurcation plus Metropolis simulated annealing, all multi-shot.
//! * [`tracking`] turns silicon hits into doublets, triplets and finally the
//!   tracking QUBO, and maps a solver's selection back to track candidates.
//! * [`metrics`] scores candidates against truth (efficiency, purity) and
//!   computes the time-to-target statistic.
//! * [`io`] reads TrackML-style CSV, generates synthetic events and
//!   (de)serializes every document the pipeline exchanges.
//! * [`cli`] wires the pipeline into the `bifurctrack` binary.

pub mod cli;
pub mod error;
pub mod io;
pub mod ising;
pub mod metrics;
pub mod solvers;
pub mod tracking;

pub use error::{Error, Result};
pub use ising::{BinaryState, IsingProblem, QuboProblem, SpinState};
