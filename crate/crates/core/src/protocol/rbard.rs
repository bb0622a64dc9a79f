//! The deciding protocol. Quantized full vectors are flooded together with
//! a firing counter `C`: any null message resets it to zero, otherwise it
//! becomes one more than the smallest counter heard. Each agent estimates
//! the network size as `ℓ / Σ(1+β)^Y` and decides once `C` exceeds 3/2 of
//! that estimate, at which point at least `n` rounds have passed since the
//! last agent woke up (with high probability).

use super::rbar::{beta_of, quantize_all, quantized_estimate};
use super::{check_len, min_into, AgentView, Message, Protocol, Samples};
use crate::error::{Error, Result};
use crate::quantization::{dequantize, QuantExponent};
use crate::sampling::{ProtocolParams, RngStream};
use crate::scalar::{sum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct RbarDState<T> {
    /// Rounds of passivity left before the agent starts executing.
    pub passive_rounds: u64,
    pub xs: Vec<QuantExponent>,
    pub ys: Vec<QuantExponent>,
    pub counter: u64,
    /// Network-size estimate; set by the first active round.
    pub n_est: Option<T>,
    /// Decision value, written at most once.
    pub decision: Option<T>,
}

impl<T> RbarDState<T> {
    pub fn is_active(&self) -> bool {
        self.passive_rounds == 0
    }
}

pub fn rbard_from_samples<T: Scalar>(
    samples: Samples<T>,
    params: &ProtocolParams,
    start_round: u64,
) -> Result<RbarDState<T>> {
    if start_round < 1 {
        return Err(Error::InvalidParameter("start rounds are numbered from 1".into()));
    }
    let beta = T::of(beta_of(params)?);
    check_len(params.ell, samples.sigma.len())?;
    check_len(params.ell, samples.nu.len())?;
    Ok(RbarDState {
        passive_rounds: start_round - 1,
        xs: quantize_all(&samples.sigma, beta)?,
        ys: quantize_all(&samples.nu, beta)?,
        counter: 0,
        n_est: None,
        decision: None,
    })
}

pub fn rbard_init<T: Scalar>(
    theta: T,
    params: &ProtocolParams,
    sum_stream: &mut RngStream,
    size_stream: &mut RngStream,
    start_round: u64,
) -> Result<RbarDState<T>> {
    let samples = super::draw_samples(theta, params, sum_stream, size_stream)?;
    rbard_from_samples(samples, params, start_round)
}

pub fn rbard_outbox<T: Scalar>(s: &RbarDState<T>) -> Message<T> {
    if s.is_active() {
        Message::Rbard { c: s.counter, x: s.xs.clone(), y: s.ys.clone() }
    } else {
        Message::Null
    }
}

pub fn rbard_apply<T: Scalar>(
    s: &RbarDState<T>,
    inbox: &[&Message<T>],
    params: &ProtocolParams,
) -> Result<RbarDState<T>> {
    if inbox.is_empty() {
        return Err(Error::EmptyInbox);
    }
    let mut next = s.clone();
    if !s.is_active() {
        // passive agents ignore what they hear
        next.passive_rounds -= 1;
        return Ok(next);
    }
    let ell = s.xs.len();
    let mut heard_null = false;
    let mut min_counter = u64::MAX;
    for m in inbox {
        match m {
            Message::Null => heard_null = true,
            Message::Rbard { c, x, y } => {
                check_len(ell, x.len())?;
                check_len(ell, y.len())?;
                min_counter = min_counter.min(*c);
                min_into(&mut next.xs, x);
                min_into(&mut next.ys, y);
            }
            other => return Err(Error::UnexpectedMessage { protocol: "rbard", got: other.kind() }),
        }
    }
    next.counter = if heard_null || min_counter == u64::MAX { 0 } else { min_counter + 1 };

    let beta = T::of(beta_of(params)?);
    let size_sum = sum(next.ys.iter().map(|&q| dequantize(q, beta)));
    let n_est = T::of_usize(ell) / size_sum;
    next.n_est = Some(n_est);
    let threshold = T::of(1.5) * n_est;
    if next.decision.is_none() && T::of(next.counter as f64) > threshold {
        next.decision = Some(quantized_estimate(&next.xs, &next.ys, beta, T::of(params.a)));
    }
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct RbarDProtocol {
    params: ProtocolParams,
}

impl RbarDProtocol {
    pub fn new(params: ProtocolParams) -> Result<Self> {
        beta_of(&params)?;
        Ok(Self { params })
    }
}

impl<T: Scalar> Protocol<T> for RbarDProtocol {
    type State = RbarDState<T>;

    fn name(&self) -> &'static str {
        "rbard"
    }

    fn params(&self) -> &ProtocolParams {
        &self.params
    }

    fn init(&self, _theta: T, start_round: u64, samples: Samples<T>) -> Result<RbarDState<T>> {
        rbard_from_samples(samples, &self.params, start_round)
    }

    fn outbox(&self, s: &RbarDState<T>) -> Message<T> {
        rbard_outbox(s)
    }

    fn apply(&self, s: &RbarDState<T>, inbox: &[&Message<T>]) -> Result<RbarDState<T>> {
        rbard_apply(s, inbox, &self.params)
    }

    fn view(&self, s: &RbarDState<T>) -> AgentView<T> {
        AgentView { x: None, d: s.decision, counter: s.is_active().then_some(s.counter), passive: !s.is_active() }
    }

    fn same_information(&self, a: &RbarDState<T>, b: &RbarDState<T>) -> bool {
        a.xs == b.xs && a.ys == b.ys
    }

    fn exponents(&self, s: &RbarDState<T>) -> Vec<QuantExponent> {
        s.xs.iter().chain(&s.ys).copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::params_rbard;

    fn params(ell: usize) -> ProtocolParams {
        params_rbard(0.4, 0.3, 0.0, 1.0, 12).unwrap().with_ell(ell).unwrap()
    }

    fn active(counter: u64, ys: &[i32]) -> RbarDState<f64> {
        RbarDState {
            passive_rounds: 0,
            xs: vec![QuantExponent(0); ys.len()],
            ys: ys.iter().map(|&k| QuantExponent(k)).collect(),
            counter,
            n_est: None,
            decision: None,
        }
    }

    fn rbard_msg(c: u64, ell: usize) -> Message<f64> {
        Message::Rbard { c, x: vec![QuantExponent(0); ell], y: vec![QuantExponent(0); ell] }
    }

    #[test]
    fn null_resets_counter() {
        let p = params(2);
        let s = active(9, &[0, 0]);
        let own = rbard_outbox(&s);
        let next = rbard_apply(&s, &[&own, &Message::Null], &p).unwrap();
        assert_eq!(next.counter, 0);
    }

    #[test]
    fn counter_is_one_plus_min() {
        let p = params(2);
        let s = active(7, &[5, 5]);
        let (a, b) = (rbard_msg(4, 2), rbard_msg(7, 2));
        let next = rbard_apply(&s, &[&a, &b], &p).unwrap();
        assert_eq!(next.counter, 5);
    }

    #[test]
    fn decides_when_counter_exceeds_threshold() {
        // β = 1 makes dequantized values exact powers of two
        let mut p = params(4);
        p.beta = Some(1.0);
        // ΣY = 4 · 2^-1 = 2, so n_est = 4 / 2 = 2 and the threshold is 3
        let s = active(3, &[-1, -1, -1, -1]);
        let own = rbard_outbox(&s);
        let next = rbard_apply(&s, &[&own], &p).unwrap();
        assert_eq!(next.counter, 4);
        assert_eq!(next.n_est, Some(2.0));
        // ΣX = 4, so d = a − 1 + 2/4
        assert_eq!(next.decision, Some(-0.5));

        let below = active(2, &[-1, -1, -1, -1]);
        let own = rbard_outbox(&below);
        assert_eq!(rbard_apply(&below, &[&own], &p).unwrap().decision, None);
    }

    #[test]
    fn decision_is_write_once() {
        let mut p = params(1);
        p.beta = Some(1.0);
        let mut s = active(100, &[0]);
        s.decision = Some(42.0);
        let other = Message::Rbard { c: 100, x: vec![QuantExponent(-3)], y: vec![QuantExponent(-3)] };
        let own = rbard_outbox(&s);
        let next = rbard_apply(&s, &[&own, &other], &p).unwrap();
        assert_eq!(next.decision, Some(42.0));
        assert_eq!(next.ys, vec![QuantExponent(-3)]);
    }

    #[test]
    fn passive_agent_emits_null_and_ignores_inbox() {
        let p = params(2);
        let s: RbarDState<f64> = rbard_from_samples(Samples { sigma: vec![1.0; 2], nu: vec![1.0; 2] }, &p, 3).unwrap();
        assert!(!s.is_active());
        assert_eq!(rbard_outbox(&s), Message::Null);
        let loud = Message::Rbard { c: 4, x: vec![QuantExponent(-9); 2], y: vec![QuantExponent(-9); 2] };
        let s1 = rbard_apply(&s, &[&Message::Null, &loud], &p).unwrap();
        assert_eq!(s1.xs, s.xs);
        assert!(!s1.is_active());
        let s2 = rbard_apply(&s1, &[&Message::Null], &p).unwrap();
        assert!(s2.is_active());
        assert!(matches!(rbard_outbox(&s2), Message::Rbard { c: 0, .. }));
        assert!(rbard_from_samples::<f64>(Samples { sigma: vec![1.0; 2], nu: vec![1.0; 2] }, &p, 0).is_err());
    }

    #[test]
    fn view_hides_counter_while_passive() {
        let p = params(1);
        let proto = RbarDProtocol::new(p.clone()).unwrap();
        let s: RbarDState<f64> = rbard_from_samples(Samples { sigma: vec![1.0], nu: vec![1.0] }, &p, 2).unwrap();
        let v = Protocol::<f64>::view(&proto, &s);
        assert!(v.passive && v.counter.is_none() && v.d.is_none());
        assert_eq!(Protocol::<f64>::estimate(&proto, &s), None);
    }
}
