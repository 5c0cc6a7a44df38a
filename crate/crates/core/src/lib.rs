//! Design and analysis of decentralized binary hypothesis tests whose sensors
//! run on harvested energy.
//!
//! Each sensor compares a scalar observation against a threshold and, if its
//! battery holds at least one energy packet, transmits a one-bit "1" to the
//! fusion center over a binary asymmetric channel. The crate provides:
//!
//! - [`observation`]: Rayleigh/Rician observation model and threshold tails.
//! - [`battery`]: the (K+1)-state battery Markov chain and its depletion
//!   probability in closed form, plus a tridiagonal linear solve.
//! - [`metrics`]: Bhattacharyya distances (constrained, unconstrained, upper
//!   bound) and the Kailath error bound.
//! - [`design`]: grid-search threshold optimization.
//! - [`network`]: exact MAP error probability by enumeration.
//! - [`sim`]: a seeded, discrete-time Monte Carlo simulator of the full system.

pub mod battery;
pub mod design;
mod error;
pub mod metrics;
pub mod network;
pub mod observation;
pub mod sim;
pub mod special;

pub use battery::{BatteryChain, BatteryParams, Capacity, Degeneracy};
pub use design::{
    optimize_constrained, optimize_unconstrained, CurvePoint, DesignResult, GridSpec,
};
pub use error::{Error, Result};
pub use metrics::{
    bd_upper_bound, bhattacharyya, channel_output_pmf, kailath_bound, unconstrained_bd,
    ChannelModel, ExtendedReal, OutputPmf, SensorDesign, SensorEvaluation,
};
pub use network::{outcome_index, NetworkScenario, MAX_ENUMERATED_SENSORS, MAX_JOINT_STATES};
pub use observation::{Hypothesis, ObservationModel, TableEntry, TailPair};
pub use sim::{derive_stream_seed, InitialBattery, SimConfig, SimReport};
