//! Admission control and resource allocation for a follow-me-cloud data center.
//!
//! A data center with `B` resource units serves two Poisson request streams:
//! new requests (NRs) from mobile terminals in the local service area and
//! migration requests (MRs) from terminals that moved in while being served
//! elsewhere. The resource manager decides, per request, whether to admit it
//! and how many units to allocate. The crate provides:
//!
//! * [`config`] : model parameters, validation, config-file parsing;
//! * [`mobility`] : the service-distance Markov chain and its occupancy
//!   statistics (average distance, interruption probability);
//! * [`smdp`] : state/event/action spaces, reward and sojourn functions,
//!   the embedded transition kernel and its uniformized discrete-time model;
//! * [`solver`] : relative value iteration, steady-state analysis, the
//!   Lagrange-multiplier search for the rejection-probability constraint and
//!   the outer fixed point on the MR rejection probability;
//! * [`policies`] : the optimal policy's baselines (greedy, all-units,
//!   fixed, reservation) as decision rules and materialized policy tables;
//! * [`sim`] : a continuous-time discrete-event simulator measuring reward,
//!   rejection probabilities, allocation and distance statistics.

pub mod config;
pub mod error;
pub(crate) mod linalg;
pub mod mobility;
pub mod policies;
pub mod sim;
pub mod smdp;
pub mod solver;

pub use config::ModelParams;
pub use error::{ConfigError, ModelError, SimError, SolveError};
