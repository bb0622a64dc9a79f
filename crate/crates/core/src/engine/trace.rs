//! Trial traces and the predicates evaluated on them.
//!
//! Snapshot `t` holds the state at the *end* of round `t`; all round bounds
//! in this crate use that convention.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ProtocolTag;
use crate::error::Result;
use crate::protocol::MessageShape;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config_hash: String,
    pub protocol: ProtocolTag,
    pub n: usize,
    pub ell: usize,
    pub epsilon: f64,
    /// True average of the inputs.
    pub theta: f64,
    /// Sum of the translated inputs `Σ(θ_u − a + 1)`.
    pub s: f64,
    pub s_max: u64,
    pub t_max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSnapshot<T> {
    pub x: Option<T>,
    pub d: Option<T>,
    pub c: Option<u64>,
    pub passive: bool,
    /// Whether the agent's minima changed during this round.
    pub info_changed: bool,
    /// Shape of the message the agent broadcast this round.
    pub sent: MessageShape,
}

impl<T: Scalar> AgentSnapshot<T> {
    /// The decision if there is one, the running estimate otherwise.
    pub fn estimate(&self) -> Option<T> {
        self.d.or(self.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSnapshot<T> {
    pub t: u64,
    pub agents: Vec<AgentSnapshot<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace<T> {
    pub meta: TraceMeta,
    /// `rounds[t - 1]` is the snapshot of round `t`.
    pub rounds: Vec<RoundSnapshot<T>>,
    /// Smallest and largest sample drawn by any agent.
    pub sample_extent: Option<(f64, f64)>,
    /// Smallest and largest quantization exponent held by any agent.
    pub exponent_range: Option<(i32, i32)>,
    /// Number of distinct quantization exponents held by any agent.
    pub distinct_exponents: usize,
    pub final_estimates: Vec<Option<T>>,
}

impl<T: Scalar> TrialTrace<T> {
    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn horizon(&self) -> u64 {
        self.rounds.len() as u64
    }

    pub fn snapshot(&self, t: u64) -> &RoundSnapshot<T> {
        &self.rounds[(t - 1) as usize]
    }

    /// Common estimate of round `t`, if every agent has one and they are
    /// all bitwise equal.
    fn agreed_at(&self, t: u64) -> Option<T> {
        let agents = &self.snapshot(t).agents;
        let first = agents.first()?.estimate()?;
        agents.iter().all(|a| a.estimate() == Some(first)).then_some(first)
    }

    /// Smallest round from which every agent holds the same estimate until
    /// the horizon, or `None` if they disagree at the horizon.
    pub fn agreement_round(&self) -> Option<u64> {
        let last = self.horizon();
        if last == 0 {
            return None;
        }
        let value = self.agreed_at(last)?;
        let mut t0 = last;
        while t0 > 1 && self.agreed_at(t0 - 1) == Some(value) {
            t0 -= 1;
        }
        Some(t0)
    }

    /// The estimate all agents agree on at the horizon.
    pub fn stationary_estimate(&self) -> Option<T> {
        self.agreed_at(self.horizon())
    }

    /// Last round in which agent `u`'s minima changed, 0 if never.
    pub fn last_info_change(&self, u: usize) -> u64 {
        self.rounds.iter().rev().find(|r| r.agents[u].info_changed).map_or(0, |r| r.t)
    }

    /// First round at whose end agent `u` holds a decision.
    pub fn decision_round(&self, u: usize) -> Option<u64> {
        self.rounds.iter().find(|r| r.agents[u].d.is_some()).map(|r| r.t)
    }

    pub fn counters(&self, u: usize) -> impl Iterator<Item = (u64, Option<u64>)> + '_ {
        self.rounds.iter().map(move |r| (r.t, r.agents[u].c))
    }

    /// Writes the trace as JSON Lines: a metadata header, then one object
    /// per round `{"t", "agents": [{"x", "d", "C"}], "msg_bits"}`.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        let bits = message_bits(self);
        serde_json::to_writer(&mut out, &json!({ "header": self.meta }))?;
        writeln!(out)?;
        for (r, msg_bits) in self.rounds.iter().zip(&bits.per_round) {
            let agents: Vec<_> = r
                .agents
                .iter()
                .map(|a| json!({ "x": a.x.map(|v| v.to_f64_lossy()), "d": a.d.map(|v| v.to_f64_lossy()), "C": a.c }))
                .collect();
            serde_json::to_writer(&mut out, &json!({ "t": r.t, "agents": agents, "msg_bits": msg_bits }))?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Smallest round `t*` such that every estimate lies in `[θ − ε, θ + ε]`
/// in every round from `t*` to the horizon. Unset estimates are outside.
pub fn convergence_time<T: Scalar>(trace: &TrialTrace<T>, epsilon: f64) -> Option<u64> {
    let theta = trace.meta.theta;
    let inside = |r: &RoundSnapshot<T>| {
        r.agents.iter().all(|a| a.estimate().map(|x| (x.to_f64_lossy() - theta).abs() <= epsilon).unwrap_or(false))
    };
    let mut t_star = None;
    for r in trace.rounds.iter().rev() {
        if !inside(r) {
            break;
        }
        t_star = Some(r.t);
    }
    t_star
}

/// Termination, irrevocability and validity of the decision variables,
/// evaluated literally over the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub termination: bool,
    pub irrevocability: bool,
    pub validity: bool,
    /// Latest first-decision round over all agents that decided.
    pub last_decision_round: Option<u64>,
}

pub fn check_decision_spec<T: Scalar>(trace: &TrialTrace<T>, epsilon: f64) -> DecisionReport {
    let theta = trace.meta.theta;
    let n = trace.n();
    let termination = trace.rounds.last().is_some_and(|r| r.agents.iter().all(|a| a.d.is_some()));

    // once set, d never changes and never reverts to unset
    let irrevocability = (0..n).all(|u| {
        let mut first: Option<T> = None;
        trace.rounds.iter().all(|r| match (first, r.agents[u].d) {
            (None, d) => {
                first = d;
                true
            }
            (Some(v), Some(d)) => v == d,
            (Some(_), None) => false,
        })
    });

    let validity = trace
        .rounds
        .iter()
        .all(|r| r.agents.iter().all(|a| a.d.is_none_or(|d| (d.to_f64_lossy() - theta).abs() <= epsilon)));

    let last_decision_round = (0..n).filter_map(|u| trace.decision_round(u)).max();
    DecisionReport { termination, irrevocability, validity, last_decision_round }
}

/// Message sizes under the post-hoc accounting rule: a quantized entry
/// costs the two's-complement width of the trial's exponent range, a
/// counter `⌈log₂(C_max + 1)⌉` bits, a cursor `⌈log₂ ℓ⌉` bits, a real its
/// machine width, and a null message 1 bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageBits {
    pub per_round: Vec<u64>,
    pub max_message: u64,
    /// Same, when agents that have decided stop sending their counter.
    pub max_message_without_decided_counters: u64,
    pub exponent_width: u32,
    pub counter_width: u32,
    pub cursor_width: u32,
    pub distinct_exponents: usize,
}

/// Smallest `w ≥ 1` with `−2^(w−1) ≤ lo` and `hi ≤ 2^(w−1) − 1`.
pub fn twos_complement_width(lo: i32, hi: i32) -> u32 {
    let (lo, hi) = (lo as i64, hi as i64);
    (1..=33).find(|&w| -(1i64 << (w - 1)) <= lo && hi < (1i64 << (w - 1))).unwrap_or(33)
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

pub fn message_bits<T: Scalar>(trace: &TrialTrace<T>) -> MessageBits {
    let exponent_width = trace.exponent_range.map_or(0, |(lo, hi)| twos_complement_width(lo, hi));
    let c_max = trace.rounds.iter().flat_map(|r| r.agents.iter().filter_map(|a| a.sent.counter)).max().unwrap_or(0);
    let counter_width = ceil_log2(c_max + 1);
    let cursor_width = ceil_log2(trace.meta.ell as u64);

    let cost = |s: &MessageShape, with_counter: bool| -> u64 {
        if s.null {
            return 1;
        }
        let mut bits = s.reals as u64 * T::BITS as u64 + s.exponents as u64 * exponent_width as u64;
        if s.cursor {
            bits += cursor_width as u64;
        }
        if s.counter.is_some() && with_counter {
            bits += counter_width as u64;
        }
        bits
    };

    let mut per_round = Vec::with_capacity(trace.rounds.len());
    let mut max_message = 0;
    let mut max_suppressed = 0;
    for (i, r) in trace.rounds.iter().enumerate() {
        let mut total = 0;
        for (u, a) in r.agents.iter().enumerate() {
            let full = cost(&a.sent, true);
            let decided_before = i > 0 && trace.rounds[i - 1].agents[u].d.is_some();
            total += full;
            max_message = max_message.max(full);
            max_suppressed = max_suppressed.max(cost(&a.sent, !decided_before));
        }
        per_round.push(total);
    }
    MessageBits {
        per_round,
        max_message,
        max_message_without_decided_counters: max_suppressed,
        exponent_width,
        counter_width,
        cursor_width,
        distinct_exponents: trace.distinct_exponents,
    }
}
