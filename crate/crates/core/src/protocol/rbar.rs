//! The quantized protocol: samples are rounded down to powers of `1 + β`
//! and only one entry pair is exchanged per round, cycling through the
//! vector positions. The estimate is refreshed each time the cursor wraps.

use super::{check_len, ratio_estimate, AgentView, Message, Protocol, Samples};
use crate::error::{Error, Result};
use crate::quantization::{dequantize, quantize, QuantExponent};
use crate::sampling::{ProtocolParams, RngStream};
use crate::scalar::{sum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct RbarState<T> {
    pub xs: Vec<QuantExponent>,
    pub ys: Vec<QuantExponent>,
    /// Position exchanged in the coming round, in `0..ℓ`.
    pub cursor: usize,
    pub estimate: Option<T>,
}

impl<T> RbarState<T> {
    /// One-based index of the entry exchanged in the coming round.
    pub fn entry_index(&self) -> usize {
        self.cursor + 1
    }
}

pub(crate) fn beta_of(params: &ProtocolParams) -> Result<f64> {
    params.beta.ok_or_else(|| Error::InvalidParameter("quantized protocol needs a rounding ratio".into()))
}

pub(crate) fn quantize_all<T: Scalar>(values: &[T], beta: T) -> Result<Vec<QuantExponent>> {
    values.iter().map(|&v| quantize(v, beta)).collect()
}

/// `a − 1 + Σ(1+β)^Y / Σ(1+β)^X`.
pub(crate) fn quantized_estimate<T: Scalar>(xs: &[QuantExponent], ys: &[QuantExponent], beta: T, a: T) -> T {
    let sx = sum(xs.iter().map(|&q| dequantize(q, beta)));
    let sy = sum(ys.iter().map(|&q| dequantize(q, beta)));
    ratio_estimate(a, sy, sx)
}

pub fn rbar_from_samples<T: Scalar>(samples: Samples<T>, params: &ProtocolParams) -> Result<RbarState<T>> {
    let beta = T::of(beta_of(params)?);
    check_len(params.ell, samples.sigma.len())?;
    check_len(params.ell, samples.nu.len())?;
    Ok(RbarState {
        xs: quantize_all(&samples.sigma, beta)?,
        ys: quantize_all(&samples.nu, beta)?,
        cursor: 0,
        estimate: None,
    })
}

pub fn rbar_init<T: Scalar>(
    theta: T,
    params: &ProtocolParams,
    sum_stream: &mut RngStream,
    size_stream: &mut RngStream,
) -> Result<RbarState<T>> {
    let samples = super::draw_samples(theta, params, sum_stream, size_stream)?;
    rbar_from_samples(samples, params)
}

pub fn rbar_outbox<T: Scalar>(s: &RbarState<T>) -> Message<T> {
    Message::Rbar { cursor: s.cursor, x: s.xs[s.cursor], y: s.ys[s.cursor] }
}

pub fn rbar_apply<T: Scalar>(s: &RbarState<T>, inbox: &[&Message<T>], params: &ProtocolParams) -> Result<RbarState<T>> {
    let mut next = s.clone();
    rbar_apply_mut(&mut next, inbox, params)?;
    Ok(next)
}

/// In-place transition; returns whether the exchanged entry pair changed.
pub fn rbar_apply_mut<T: Scalar>(s: &mut RbarState<T>, inbox: &[&Message<T>], params: &ProtocolParams) -> Result<bool> {
    if inbox.is_empty() {
        return Err(Error::EmptyInbox);
    }
    let i = s.cursor;
    let (mut x, mut y) = (s.xs[i], s.ys[i]);
    for m in inbox {
        match m {
            Message::Rbar { cursor, x: mx, y: my } => {
                if *cursor != i {
                    return Err(Error::CursorMismatch { expected: i, got: *cursor });
                }
                x = x.min(*mx);
                y = y.min(*my);
            }
            other => return Err(Error::UnexpectedMessage { protocol: "rbar", got: other.kind() }),
        }
    }
    let changed = x != s.xs[i] || y != s.ys[i];
    s.xs[i] = x;
    s.ys[i] = y;
    s.cursor += 1;
    if s.cursor == s.xs.len() {
        let beta = T::of(beta_of(params)?);
        s.estimate = Some(quantized_estimate(&s.xs, &s.ys, beta, T::of(params.a)));
        s.cursor = 0;
    }
    Ok(changed)
}

#[derive(Debug, Clone)]
pub struct RbarProtocol {
    params: ProtocolParams,
}

impl RbarProtocol {
    pub fn new(params: ProtocolParams) -> Result<Self> {
        beta_of(&params)?;
        Ok(Self { params })
    }
}

impl<T: Scalar> Protocol<T> for RbarProtocol {
    type State = RbarState<T>;

    fn name(&self) -> &'static str {
        "rbar"
    }

    fn params(&self) -> &ProtocolParams {
        &self.params
    }

    fn init(&self, _theta: T, _start_round: u64, samples: Samples<T>) -> Result<RbarState<T>> {
        rbar_from_samples(samples, &self.params)
    }

    fn outbox(&self, s: &RbarState<T>) -> Message<T> {
        rbar_outbox(s)
    }

    fn apply(&self, s: &RbarState<T>, inbox: &[&Message<T>]) -> Result<RbarState<T>> {
        rbar_apply(s, inbox, &self.params)
    }

    fn apply_mut(&self, s: &mut RbarState<T>, inbox: &[&Message<T>]) -> Result<bool> {
        rbar_apply_mut(s, inbox, &self.params)
    }

    fn view(&self, s: &RbarState<T>) -> AgentView<T> {
        AgentView { x: s.estimate, d: None, counter: None, passive: false }
    }

    fn same_information(&self, a: &RbarState<T>, b: &RbarState<T>) -> bool {
        a.xs == b.xs && a.ys == b.ys
    }

    fn exponents(&self, s: &RbarState<T>) -> Vec<QuantExponent> {
        s.xs.iter().chain(&s.ys).copied().collect()
    }
}
