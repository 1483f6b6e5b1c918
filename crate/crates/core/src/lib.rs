//! Photon statistics of a single quantum dot in a microcavity.
//!
//! The carrier, photon and correlation dynamics follow a cluster expansion
//! truncated at doublets ([`dynamics`]). [`solver`] integrates it and finds
//! steady states, [`observables`] turns a state into ⟨a†a⟩, ⟨a†a†aa⟩, g²(0)
//! and the output rate, [`sweep`] runs parameter grids, and [`oracle`] solves
//! the corresponding truncated master equation exactly for cross-checks.

pub mod dynamics;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod solver;
pub mod sweep;

pub use dynamics::{rhs, CorrelationToggles, DynamicState, STATE_DIM};
pub use model::{CavityGeometry, FrequencyConvention, ModelError, ModelParams, ReferenceRabi, ValidationReport};
pub use observables::{g2_zero, observables_of, output_rate, Observables, G2};
pub use solver::{integrate, steady_state, IntegrationConfig, Method, SolverError, SteadyState, Trajectory};
pub use sweep::{regime_classify, run_sweep, run_sweep_parallel, Regime, SweepGrid, SweepRecord};
