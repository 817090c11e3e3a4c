//! Networked resource-consumption dynamics.
//!
//! A renewable resource with logistic growth is harvested by `n` agents whose
//! consumption efforts respond to resource scarcity and to their neighbours'
//! consumption through a row-stochastic influence network. This crate builds
//! such models, computes their equilibrium, simulates them, and checks two
//! certificates numerically:
//!
//! * global asymptotic stability via a Lyapunov function and the spectrum of
//!   `TᵀΘ + ΘT` ([`stability`]);
//! * finite-horizon sustainability, i.e. invariance of a box in the
//!   `(v, v̇)` plane, via a bound on `‖T‖₁` ([`sustainability`]).
//!
//! Run `cargo run --example` to list the walkthroughs.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod network;
pub mod scenarios;
pub mod stability;
pub mod sustainability;

pub use dynamics::{
    equilibrium, from_shifted, original_field, shifted_field, to_shifted, Equilibrium,
    OriginalState, ShiftedRate, ShiftedState, ShiftedSystem, VectorField,
};
pub use error::{Error, Result};
pub use integrator::{integrate, integrate_with, Component, Trajectory, DEFAULT_STEP};
pub use network::{
    build_network, check_assumptions, interaction_matrix, one_norm, AgentParams,
    AssumptionReport, Network,
};
pub use scenarios::{Preset, ScenarioConfig, Society};
pub use stability::{
    descent_check, gram_matrix, lyapunov, lyapunov_rate, spectral_certificate, SpectralReport,
};
pub use sustainability::{
    box_invariance, certify, constants, minimal_window, SustainabilityBox,
    SustainabilityCertificate, SustainabilityConstants,
};
