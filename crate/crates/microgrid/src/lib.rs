//! Dynamic modelling and small-signal stability analysis of a
//! droop-controlled two-inverter autonomous microgrid.
//!
//! The crate implements four models of the same two-bus system at different
//! levels of detail, from a 28-state average model with LC filters and
//! cascaded inner control loops down to two 10-state droop models, and the
//! machinery to compare them: equilibrium solving with the synchronous
//! frequency as an unknown, analytic and finite-difference linearization,
//! eigenvalue sweeps over the droop gains, stability-region boundary
//! tracing in the `(k_p, k_q)` plane, accuracy classification of the
//! reduced models against the detailed one, and nonlinear time-domain
//! simulation.
//!
//! Start with [`config::MicrogridConfig`] and [`models::ModelKind`], then:
//!
//! * [`equilibrium::find_equilibrium`] for the operating point,
//! * [`linearize::linearize_analytic`] for the small-signal model,
//! * [`stability::eigen`], [`stability::eigenloci_sweep`],
//!   [`stability::stability_boundary`], and [`stability::model_report`]
//!   for the comparisons,
//! * [`sim::simulate`] for trajectories.
//!
//! The `examples/` directory walks through each capability; the `microgrid`
//! binary exposes the same operations as CSV-emitting subcommands.

pub mod config;
pub mod equilibrium;
pub mod error;
pub mod frames;
pub mod linearize;
pub mod models;
pub mod output;
pub mod sim;
pub mod stability;

pub use config::{InverterParams, LineParams, LoadParams, MicrogridConfig, RxPreset};
pub use error::Error;
pub use models::{ModelKind, PowerPair, StateVector};
