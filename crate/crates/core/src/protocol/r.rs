//! The unquantized protocol: agents flood entrywise minima of two sample
//! vectors and estimate the average as `a − 1 + ΣY / ΣX`.
//!
//! By the min-of-exponentials property, the global minimum of the sum
//! samples at each position is `Exp(s)` with `s = Σ(θ_u − a + 1)`, and the
//! global minimum of the size samples is `Exp(n)`; the ratio of the two
//! vector sums concentrates around `s / n`.

use super::{check_len, min_into, ratio_estimate, AgentView, Message, Protocol, Samples};
use crate::error::{Error, Result};
use crate::sampling::{ProtocolParams, RngStream};
use crate::scalar::{sum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct RState<T> {
    /// Minima of the sum samples seen so far.
    pub xs: Vec<T>,
    /// Minima of the size samples seen so far.
    pub ys: Vec<T>,
    pub estimate: Option<T>,
}

pub fn r_from_samples<T: Scalar>(samples: Samples<T>, params: &ProtocolParams) -> Result<RState<T>> {
    check_len(params.ell, samples.sigma.len())?;
    check_len(params.ell, samples.nu.len())?;
    Ok(RState { xs: samples.sigma, ys: samples.nu, estimate: None })
}

pub fn r_init<T: Scalar>(
    theta: T,
    params: &ProtocolParams,
    sum_stream: &mut RngStream,
    size_stream: &mut RngStream,
) -> Result<RState<T>> {
    let samples = super::draw_samples(theta, params, sum_stream, size_stream)?;
    r_from_samples(samples, params)
}

pub fn r_outbox<T: Scalar>(s: &RState<T>) -> Message<T> {
    Message::R { x: s.xs.clone(), y: s.ys.clone() }
}

pub fn r_apply<T: Scalar>(s: &RState<T>, inbox: &[&Message<T>], params: &ProtocolParams) -> Result<RState<T>> {
    if inbox.is_empty() {
        return Err(Error::EmptyInbox);
    }
    let ell = s.xs.len();
    let mut xs = s.xs.clone();
    let mut ys = s.ys.clone();
    for m in inbox {
        match m {
            Message::R { x, y } => {
                check_len(ell, x.len())?;
                check_len(ell, y.len())?;
                min_into(&mut xs, x);
                min_into(&mut ys, y);
            }
            other => return Err(Error::UnexpectedMessage { protocol: "r", got: other.kind() }),
        }
    }
    let estimate = ratio_estimate(T::of(params.a), sum(ys.iter().copied()), sum(xs.iter().copied()));
    Ok(RState { xs, ys, estimate: Some(estimate) })
}

#[derive(Debug, Clone)]
pub struct RProtocol {
    params: ProtocolParams,
}

impl RProtocol {
    pub fn new(params: ProtocolParams) -> Self {
        Self { params }
    }
}

impl<T: Scalar> Protocol<T> for RProtocol {
    type State = RState<T>;

    fn name(&self) -> &'static str {
        "r"
    }

    fn params(&self) -> &ProtocolParams {
        &self.params
    }

    fn init(&self, _theta: T, _start_round: u64, samples: Samples<T>) -> Result<RState<T>> {
        r_from_samples(samples, &self.params)
    }

    fn outbox(&self, s: &RState<T>) -> Message<T> {
        r_outbox(s)
    }

    fn apply(&self, s: &RState<T>, inbox: &[&Message<T>]) -> Result<RState<T>> {
        r_apply(s, inbox, &self.params)
    }

    fn view(&self, s: &RState<T>) -> AgentView<T> {
        AgentView { x: s.estimate, d: None, counter: None, passive: false }
    }

    fn same_information(&self, a: &RState<T>, b: &RState<T>) -> bool {
        a.xs == b.xs && a.ys == b.ys
    }
}
