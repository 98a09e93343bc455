//! Dressed-state rate equations for two atoms in a pumped, leaky cavity, and
//! the entanglement of their steady states.
//!
//! The pipeline runs bottom-up: [`fock`] builds product kets and field
//! operators, [`dressed`] assembles the coupled atom-field eigenbasis,
//! [`kinetics`] turns the incoherent channels into a rate matrix and solves
//! it, [`entanglement`] measures the reduced atomic state, and [`analysis`]
//! bundles the presets, sweeps and the maximization.

pub mod analysis;
pub mod dressed;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod kinetics;
pub mod optimize;

pub use analysis::{
    free_space_reference, linspace, maximize_ps1, nonlinear_leak_search, run_scenario, run_transient, sweep,
    truncated_argument, LeakSearch, MaximizeOptions, Maximum, Measures, Scenario, ScenarioKind, ScenarioOutcome,
    SweepPoint, SweepResult, SweepSpec,
};
pub use dressed::{build_ladder, DressedLabel, DressedLadder, DressedState, Tag};
pub use entanglement::{
    bell_fraction, closed_form_argument, concurrence, concurrence_closed_form, concurrence_gradient, DensityMatrix,
    PopulationSplit,
};
pub use error::{Error, Result};
pub use fock::{AtomKind, FockProduct, Level, LevelSet, StateVector};
pub use kinetics::{
    closed_form_steady_state, evolve, steady_state, Channel, KineticModel, ModelParams, PopulationVector, RateMatrix,
    SlotLabel,
};
