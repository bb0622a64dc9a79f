//! Randomized average consensus over dynamic directed graphs.
//!
//! Agents estimate the average of their inputs by flooding minima of
//! exponential samples: the minimum of independent exponentials is
//! exponential with the summed rate, so minima of samples drawn at rate
//! `θ_u − a + 1` estimate the input sum and minima of rate-1 samples estimate
//! the network size. The crate provides
//!
//! * [`graph`]: directed graphs, products, connectivity predicates and
//!   dynamic schedules (including an adversarial one),
//! * [`sampling`]: keyed random streams, exponential variates and the
//!   parameter formulas of the protocols,
//! * [`quantization`]: logarithmic rounding carried as integer exponents,
//! * [`protocol`]: the agent state machines (Min, unquantized, quantized
//!   and deciding),
//! * [`engine`]: round-based execution, traces and trace predicates,
//! * [`harness`]: Monte Carlo experiments and reports,
//! * [`verify`]: property suites for the graph and concentration lemmas.
//!
//! State and arithmetic are generic over [`Scalar`]; the aliases below fix
//! the scalar to `f64`, which is what the harness uses.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod graph;
pub mod harness;
pub mod protocol;
pub mod quantization;
pub mod sampling;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use engine::{run_trial, run_trial_as, ProtocolTag, Simulation, TrialConfig};
pub use graph::{DirectedGraph, DynamicSchedule};
pub use quantization::QuantExponent;
pub use sampling::{ProtocolParams, RngStream};

/// Default real type.
pub type Real = f64;

pub type MinState = protocol::MinState<Real>;
pub type RState = protocol::RState<Real>;
pub type RbarState = protocol::RbarState<Real>;
pub type RbarDState = protocol::RbarDState<Real>;
pub type Message = protocol::Message<Real>;
pub type Samples = protocol::Samples<Real>;
pub type TrialTrace = engine::TrialTrace<Real>;
pub type AgentSnapshot = engine::AgentSnapshot<Real>;
