//! Forward simulation and inverse analysis of Landau-Zener-Stückelberg
//! interference in a flux qubit driven by a single triangle flux pulse.
//!
//! * [`model`]: spectrum parameterization, triangle drive, reduced Hamiltonians
//! * [`propagator`]: coherent density-matrix propagation over one pulse
//! * [`analytic`]: closed-form phase, population and Landau-Zener formulas
//! * [`sweep`]: parallel (Φ_f, τ) interference maps
//! * [`mapio`]: CSV and PGM map files
//! * [`analysis`]: spectrum extraction from maps
//!
//! Energies are angular frequencies in rad/ns (ħ = 1) labelled "GHz"; see
//! [`model`] for the full unit conventions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod analytic;
pub mod error;
pub mod mapio;
pub mod model;
pub mod propagator;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{Anticrossing, FluxDetuning, HamiltonianMatrix, QubitSpectrum, TrianglePulse};
pub use propagator::{
    evolve, evolve_traced, initial_state, liouville_rhs, DensityMatrix, EvolutionResult, Method,
    StepperConfig,
};
pub use sweep::{run_sweep, run_sweep_with_workers, AxisRange, GridSpec, InterferenceMap};
