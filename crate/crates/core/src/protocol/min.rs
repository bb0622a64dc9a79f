//! Min: every agent repeatedly takes the minimum of what it hears.

use super::{AgentView, Message, Protocol, Samples};
use crate::error::{Error, Result};
use crate::sampling::ProtocolParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinState<T> {
    pub x: T,
}

pub fn min_init<T: Scalar>(theta: T) -> MinState<T> {
    MinState { x: theta }
}

pub fn min_outbox<T: Scalar>(s: &MinState<T>) -> Message<T> {
    Message::Min { x: s.x }
}

pub fn min_apply<T: Scalar>(_s: &MinState<T>, inbox: &[&Message<T>]) -> Result<MinState<T>> {
    let mut best: Option<T> = None;
    for m in inbox {
        match m {
            Message::Min { x } => best = Some(best.map_or(*x, |b| b.min(*x))),
            other => return Err(Error::UnexpectedMessage { protocol: "min", got: other.kind() }),
        }
    }
    best.map(|x| MinState { x }).ok_or(Error::EmptyInbox)
}

#[derive(Debug, Clone)]
pub struct MinProtocol {
    params: ProtocolParams,
}

impl MinProtocol {
    pub fn new(params: ProtocolParams) -> Self {
        Self { params }
    }
}

impl<T: Scalar> Protocol<T> for MinProtocol {
    type State = MinState<T>;

    fn name(&self) -> &'static str {
        "min"
    }

    fn params(&self) -> &ProtocolParams {
        &self.params
    }

    fn sample_count(&self) -> usize {
        0
    }

    fn init(&self, theta: T, _start_round: u64, _samples: Samples<T>) -> Result<MinState<T>> {
        Ok(min_init(theta))
    }

    fn outbox(&self, s: &MinState<T>) -> Message<T> {
        min_outbox(s)
    }

    fn apply(&self, s: &MinState<T>, inbox: &[&Message<T>]) -> Result<MinState<T>> {
        min_apply(s, inbox)
    }

    fn view(&self, s: &MinState<T>) -> AgentView<T> {
        AgentView { x: Some(s.x), d: None, counter: None, passive: false }
    }

    fn same_information(&self, a: &MinState<T>, b: &MinState<T>) -> bool {
        a.x == b.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msgs(xs: &[f64]) -> Vec<Message<f64>> {
        xs.iter().map(|&x| Message::Min { x }).collect()
    }

    #[test]
    fn takes_minimum() {
        let s = min_init(3.0);
        let own = msgs(&[3.0]);
        assert_eq!(min_apply(&s, &own.iter().collect::<Vec<_>>()).unwrap().x, 3.0);
        let all = msgs(&[3.0, 1.0, 2.0]);
        assert_eq!(min_apply(&s, &all.iter().collect::<Vec<_>>()).unwrap().x, 1.0);
    }

    #[test]
    fn rejects_empty_and_foreign_inbox() {
        let s = min_init(3.0f64);
        assert_eq!(min_apply(&s, &[]), Err(Error::EmptyInbox));
        let null = Message::Null;
        assert!(matches!(min_apply(&s, &[&null]), Err(Error::UnexpectedMessage { .. })));
    }
}
