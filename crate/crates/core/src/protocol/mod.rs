//! Agent state machines.
//!
//! Each protocol is a pure transition system: an agent's outgoing message is
//! a function of its state, and its next state is a function of its state and
//! the messages it received. Protocols never see the communication graph;
//! the engine owns delivery.

mod message;
mod min;
mod r;
mod rbar;
mod rbard;

use crate::error::{Error, Result};
use crate::quantization::QuantExponent;
use crate::sampling::{sample_exponentials, ProtocolParams, RngStream};
use crate::scalar::Scalar;

pub use message::{Message, MessageShape};
pub use min::{min_apply, min_init, min_outbox, MinProtocol, MinState};
pub use r::{r_apply, r_init, r_outbox, RProtocol, RState};
pub use rbar::{rbar_apply, rbar_apply_mut, rbar_init, rbar_outbox, RbarProtocol, RbarState};
pub use rbard::{rbard_apply, rbard_init, rbard_outbox, RbarDProtocol, RbarDState};

/// Observable per-agent quantities recorded in traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentView<T> {
    /// Running estimate of the average, if the protocol keeps one.
    pub x: Option<T>,
    /// Irrevocable decision, for deciding protocols.
    pub d: Option<T>,
    /// Firing counter, for active agents of deciding protocols.
    pub counter: Option<u64>,
    pub passive: bool,
}

/// The two sample vectors drawn by an agent at start-up: `sigma` from
/// `Exp(θ − a + 1)` and `nu` from `Exp(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<T> {
    pub sigma: Vec<T>,
    pub nu: Vec<T>,
}

impl<T: Scalar> Samples<T> {
    /// Smallest and largest sample, or `None` when empty.
    pub fn extent(&self) -> Option<(T, T)> {
        self.sigma.iter().chain(&self.nu).fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

/// Draws the `ℓ` sum samples at rate `θ − a + 1` and `ℓ` size samples at
/// rate 1 from the agent's two private streams.
pub fn draw_samples<T: Scalar>(
    theta: T,
    params: &ProtocolParams,
    sum_stream: &mut RngStream,
    size_stream: &mut RngStream,
) -> Result<Samples<T>> {
    check_input(theta, params)?;
    let rate = theta - T::of(params.a) + T::one();
    Ok(Samples {
        sigma: sample_exponentials(rate, params.ell, sum_stream)?,
        nu: sample_exponentials(T::one(), params.ell, size_stream)?,
    })
}

pub(crate) fn check_input<T: Scalar>(theta: T, params: &ProtocolParams) -> Result<()> {
    let t = theta.to_f64_lossy();
    if !params.contains(t) {
        return Err(Error::InvalidParameter(format!("input {t} outside [{}, {}]", params.a, params.b)));
    }
    Ok(())
}

/// `a − 1 + ΣY / ΣX`.
#[inline]
pub(crate) fn ratio_estimate<T: Scalar>(a: T, sum_y: T, sum_x: T) -> T {
    debug_assert!(sum_x > T::zero(), "sums of positive samples are positive");
    a - T::one() + sum_y / sum_x
}

/// A protocol run by every agent of a trial.
pub trait Protocol<T: Scalar>: Send + Sync {
    type State: Clone + std::fmt::Debug + Send + Sync;

    fn name(&self) -> &'static str;

    fn params(&self) -> &ProtocolParams;

    /// Samples each agent draws at start-up; zero for protocols that use none.
    fn sample_count(&self) -> usize {
        self.params().ell
    }

    /// Initial state of an agent with input `theta`, activated at
    /// `start_round`, holding the given samples.
    fn init(&self, theta: T, start_round: u64, samples: Samples<T>) -> Result<Self::State>;

    fn outbox(&self, state: &Self::State) -> Message<T>;

    fn apply(&self, state: &Self::State, inbox: &[&Message<T>]) -> Result<Self::State>;

    /// [`Protocol::apply`] in place. Returns whether the minima changed.
    /// On error the state is left untouched.
    fn apply_mut(&self, state: &mut Self::State, inbox: &[&Message<T>]) -> Result<bool> {
        let next = self.apply(state, inbox)?;
        let changed = !self.same_information(state, &next);
        *state = next;
        Ok(changed)
    }

    fn view(&self, state: &Self::State) -> AgentView<T>;

    /// Whether two states hold the same minima (the information that
    /// spreads through the network).
    fn same_information(&self, a: &Self::State, b: &Self::State) -> bool;

    /// Quantized values held by an agent.
    fn exponents(&self, _state: &Self::State) -> Vec<QuantExponent> {
        Vec::new()
    }

    /// `x` for estimating protocols, `d` for deciding ones.
    fn estimate(&self, state: &Self::State) -> Option<T> {
        let v = self.view(state);
        v.d.or(v.x)
    }
}

/// Entrywise minimum of `into` and `other`.
#[inline]
pub(crate) fn min_into<V: PartialOrd + Copy>(into: &mut [V], other: &[V]) {
    for (a, &b) in into.iter_mut().zip(other) {
        if b < *a {
            *a = b;
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}
