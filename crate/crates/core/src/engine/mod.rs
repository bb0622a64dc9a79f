//! Round-based execution.
//!
//! In round `t` every agent broadcasts its outgoing message, agent `v`
//! receives the message of `u` exactly when `(u, v)` is an edge of the
//! schedule's graph for round `t`, and every agent applies its transition.
//! Rounds are communication closed and the engine is single-threaded per
//! trial, so a trial is a pure function of its configuration.

mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DynamicSchedule;
use crate::protocol::{draw_samples, MinProtocol, Protocol, RProtocol, RbarDProtocol, RbarProtocol, Samples};
use crate::sampling::{ProtocolParams, Purpose, RngStream};
use crate::scalar::Scalar;

pub use trace::{
    check_decision_spec, convergence_time, message_bits, twos_complement_width, AgentSnapshot, DecisionReport,
    MessageBits, RoundSnapshot, TraceMeta, TrialTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolTag {
    Min,
    R,
    Rbar,
    Rbard,
}

impl ProtocolTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolTag::Min => "min",
            ProtocolTag::R => "r",
            ProtocolTag::Rbar => "rbar",
            ProtocolTag::Rbard => "rbard",
        }
    }
}

impl std::str::FromStr for ProtocolTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(ProtocolTag::Min),
            "r" => Ok(ProtocolTag::R),
            "rbar" => Ok(ProtocolTag::Rbar),
            "rbard" => Ok(ProtocolTag::Rbard),
            other => Err(Error::InvalidParameter(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Everything that determines a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub protocol: ProtocolTag,
    pub params: ProtocolParams,
    pub inputs: Vec<f64>,
    pub schedule: DynamicSchedule,
    /// Round in which each agent becomes active; all 1 except for `rbard`.
    pub start_rounds: Vec<u64>,
    pub t_max: u64,
    /// Master seed of the agents' random streams. The schedule has its own.
    pub seed: u64,
    #[serde(default)]
    pub trial: u64,
}

impl TrialConfig {
    pub fn n(&self) -> usize {
        self.schedule.n()
    }

    /// Last round in which some agent is passive.
    pub fn s_max(&self) -> u64 {
        self.start_rounds.iter().max().map_or(0, |s| s - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.inputs.len() != n {
            return bad(format!("{} inputs for {n} agents", self.inputs.len()));
        }
        if self.start_rounds.len() != n {
            return bad(format!("{} start rounds for {n} agents", self.start_rounds.len()));
        }
        if self.start_rounds.iter().any(|&s| s < 1) {
            return bad("start rounds are numbered from 1".into());
        }
        if self.protocol != ProtocolTag::Rbard && self.start_rounds.iter().any(|&s| s != 1) {
            return bad(format!("protocol {} requires synchronous starts", self.protocol.as_str()));
        }
        if self.t_max < 1 {
            return bad("horizon must be at least one round".into());
        }
        if self.protocol != ProtocolTag::Min {
            if let Some(&x) = self.inputs.iter().find(|&&x| !self.params.contains(x)) {
                return bad(format!("input {x} outside [{}, {}]", self.params.a, self.params.b));
            }
            if self.params.ell == 0 {
                return bad("ell must be positive".into());
            }
        }
        if matches!(self.protocol, ProtocolTag::Rbar | ProtocolTag::Rbard) && self.params.beta.is_none() {
            return bad("quantized protocols need a rounding ratio".into());
        }
        Ok(())
    }

    /// Four times the round bound guaranteed for the protocol on this
    /// schedule, or `None` when the schedule guarantees nothing.
    pub fn default_horizon(
        protocol: ProtocolTag,
        params: &ProtocolParams,
        schedule: &DynamicSchedule,
        s_max: u64,
    ) -> Option<u64> {
        let n = schedule.n() as u64;
        let spread = schedule.dissemination_bound()?;
        let bound = match protocol {
            ProtocolTag::Min | ProtocolTag::R => spread,
            ProtocolTag::Rbar => params.ell as u64 * (spread + 1),
            ProtocolTag::Rbard => s_max + 2 * n.max(spread),
        };
        Some(4 * bound.max(1))
    }
}

/// A running trial: agent states plus the round counter.
pub struct Simulation<T: Scalar, P: Protocol<T>> {
    protocol: P,
    schedule: DynamicSchedule,
    states: Vec<P::State>,
    initial_samples: Vec<Samples<T>>,
    round: u64,
}

impl<T: Scalar, P: Protocol<T>> Simulation<T, P> {
    /// Draws every agent's samples from its private streams keyed by
    /// `(seed, trial, agent)` and builds the initial states.
    pub fn new(
        protocol: P,
        inputs: &[T],
        start_rounds: &[u64],
        schedule: DynamicSchedule,
        seed: u64,
        trial: u64,
    ) -> Result<Self> {
        let n = schedule.n();
        if inputs.len() != n || start_rounds.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{} inputs and {} start rounds for {n} agents",
                inputs.len(),
                start_rounds.len()
            )));
        }
        let mut states = Vec::with_capacity(n);
        let mut initial_samples = Vec::with_capacity(n);
        for (u, (&theta, &start)) in inputs.iter().zip(start_rounds).enumerate() {
            let samples = if protocol.sample_count() > 0 {
                let mut sum_stream = RngStream::for_agent(seed, trial, u, Purpose::SumSamples);
                let mut size_stream = RngStream::for_agent(seed, trial, u, Purpose::SizeSamples);
                draw_samples(theta, protocol.params(), &mut sum_stream, &mut size_stream)?
            } else {
                Samples { sigma: Vec::new(), nu: Vec::new() }
            };
            states.push(protocol.init(theta, start, samples.clone())?);
            initial_samples.push(samples);
        }
        Ok(Self { protocol, schedule, states, initial_samples, round: 0 })
    }

    pub fn protocol(&self) -> &P {
        &self.protocol
    }

    pub fn states(&self) -> &[P::State] {
        &self.states
    }

    pub fn initial_samples(&self) -> &[Samples<T>] {
        &self.initial_samples
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Runs one round and returns its end-of-round snapshot. After an
    /// error the states are unspecified and the simulation should be dropped.
    pub fn step(&mut self) -> Result<RoundSnapshot<T>> {
        self.round += 1;
        let t = self.round;
        let graph = self.schedule.graph_at(t);
        let outbox: Vec<_> = self.states.iter().map(|s| self.protocol.outbox(s)).collect();
        let mut agents = Vec::with_capacity(self.states.len());
        for (v, state) in self.states.iter_mut().enumerate() {
            let inbox: Vec<_> = graph.in_neighbors(v).map(|u| &outbox[u]).collect();
            let info_changed = self.protocol.apply_mut(state, &inbox)?;
            let view = self.protocol.view(state);
            agents.push(AgentSnapshot {
                x: view.x,
                d: view.d,
                c: view.counter,
                passive: view.passive,
                info_changed,
                sent: outbox[v].shape(),
            });
        }
        Ok(RoundSnapshot { t, agents })
    }

    /// Runs `t_max` rounds from the initial state and returns the trace.
    pub fn run(mut self, meta: TraceMeta, t_max: u64) -> Result<TrialTrace<T>> {
        let mut exponents: Vec<i32> =
            self.states.iter().flat_map(|s| self.protocol.exponents(s)).map(|q| q.get()).collect();
        exponents.sort_unstable();
        exponents.dedup();
        let sample_extent = self
            .initial_samples
            .iter()
            .filter_map(Samples::extent)
            .map(|(lo, hi)| (lo.to_f64_lossy(), hi.to_f64_lossy()))
            .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)));

        let mut rounds = Vec::with_capacity(t_max as usize);
        for _ in 0..t_max {
            rounds.push(self.step()?);
        }
        let final_estimates = self.states.iter().map(|s| self.protocol.estimate(s)).collect();
        Ok(TrialTrace {
            meta,
            rounds,
            sample_extent,
            exponent_range: exponents.first().copied().zip(exponents.last().copied()),
            distinct_exponents: exponents.len(),
            final_estimates,
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn meta_for(cfg: &TrialConfig) -> Result<TraceMeta> {
    let n = cfg.n();
    let theta = cfg.inputs.iter().sum::<f64>() / n as f64;
    let s = cfg.inputs.iter().map(|x| x - cfg.params.a + 1.0).sum();
    Ok(TraceMeta {
        config_hash: format!("{:016x}", fnv1a(serde_json::to_string(cfg)?.as_bytes())),
        protocol: cfg.protocol,
        n,
        ell: cfg.params.ell,
        epsilon: cfg.params.epsilon,
        theta,
        s,
        s_max: cfg.s_max(),
        t_max: cfg.t_max,
    })
}

fn run_with<T: Scalar, P: Protocol<T>>(protocol: P, cfg: &TrialConfig) -> Result<TrialTrace<T>> {
    let inputs: Vec<T> = cfg.inputs.iter().map(|&x| T::of(x)).collect();
    let sim = Simulation::new(protocol, &inputs, &cfg.start_rounds, cfg.schedule.clone(), cfg.seed, cfg.trial)?;
    sim.run(meta_for(cfg)?, cfg.t_max)
}

/// Runs a trial in the given scalar type.
pub fn run_trial_as<T: Scalar>(cfg: &TrialConfig) -> Result<TrialTrace<T>> {
    cfg.validate()?;
    let params = cfg.params.clone();
    match cfg.protocol {
        ProtocolTag::Min => run_with(MinProtocol::new(params), cfg),
        ProtocolTag::R => run_with(RProtocol::new(params), cfg),
        ProtocolTag::Rbar => run_with(RbarProtocol::new(params)?, cfg),
        ProtocolTag::Rbard => run_with(RbarDProtocol::new(params)?, cfg),
    }
}

/// Runs a trial with 64-bit reals.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialTrace<f64>> {
    run_trial_as::<f64>(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;
    use crate::sampling::{params_min, params_r, params_rbar, params_rbard};

    fn min_cfg(inputs: Vec<f64>, schedule: DynamicSchedule) -> TrialConfig {
        let n = inputs.len();
        TrialConfig {
            protocol: ProtocolTag::Min,
            params: params_min(0.3, 0.2, 0.0, 10.0).unwrap(),
            inputs,
            schedule,
            start_rounds: vec![1; n],
            t_max: 6,
            seed: 1,
            trial: 0,
        }
    }

    #[test]
    fn min_on_ring_converges_in_n_minus_one() {
        let ring = DynamicSchedule::fixed(DirectedGraph::ring(4).unwrap());
        let trace = run_trial(&min_cfg(vec![4.0, 3.0, 2.0, 1.0], ring)).unwrap();
        let at = |t: usize| trace.rounds[t - 1].agents.iter().map(|a| a.x.unwrap()).collect::<Vec<_>>();
        assert_eq!(at(3), vec![1.0; 4]);
        assert_ne!(at(2), vec![1.0; 4]);
        assert_eq!(trace.agreement_round(), Some(3));
    }

    #[test]
    fn single_agent_is_stationary_from_round_one() {
        let one = DynamicSchedule::fixed(DirectedGraph::self_loops(1).unwrap());
        for (tag, params) in [
            (ProtocolTag::Min, params_min(0.3, 0.2, 0.0, 1.0).unwrap()),
            (ProtocolTag::R, params_r(0.3, 0.2, 0.0, 1.0).unwrap().with_ell(50).unwrap()),
            (ProtocolTag::Rbar, params_rbar(0.4, 0.4, 0.0, 1.0).unwrap().with_ell(1).unwrap()),
        ] {
            let cfg = TrialConfig {
                protocol: tag,
                params,
                inputs: vec![0.5],
                schedule: one.clone(),
                start_rounds: vec![1],
                t_max: 5,
                seed: 3,
                trial: 0,
            };
            let trace = run_trial(&cfg).unwrap();
            assert_eq!(trace.agreement_round(), Some(1), "{tag:?}");
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let cfg = TrialConfig {
            protocol: ProtocolTag::R,
            params: params_r(0.3, 0.2, 0.0, 1.0).unwrap().with_ell(64).unwrap(),
            inputs: vec![0.1, 0.9, 0.4, 0.6, 0.3],
            schedule: DynamicSchedule::csc_random(5, 77).unwrap(),
            start_rounds: vec![1; 5],
            t_max: 10,
            seed: 5,
            trial: 2,
        };
        let a = run_trial(&cfg).unwrap();
        let b = run_trial(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 6;
        assert_ne!(run_trial(&other).unwrap().final_estimates, a.final_estimates);
    }

    #[test]
    fn validation() {
        let ring = DynamicSchedule::fixed(DirectedGraph::ring(3).unwrap());
        let mut cfg = min_cfg(vec![1.0, 2.0, 3.0], ring);
        assert!(cfg.validate().is_ok());
        cfg.start_rounds = vec![1, 2, 1];
        assert!(cfg.validate().is_err());
        cfg.start_rounds = vec![1, 1];
        assert!(cfg.validate().is_err());
        cfg.start_rounds = vec![1, 1, 1];
        cfg.t_max = 0;
        assert!(cfg.validate().is_err());

        let mut rb = cfg.clone();
        rb.t_max = 3;
        rb.protocol = ProtocolTag::Rbar;
        rb.params = params_rbar(0.4, 0.4, 0.0, 1.0).unwrap();
        rb.inputs = vec![0.1, 0.2, 0.3];
        rb.start_rounds = vec![1, 1, 2];
        assert!(matches!(run_trial(&rb), Err(Error::InvalidConfig(_))));
        rb.start_rounds = vec![1, 1, 1];
        rb.inputs = vec![0.1, 0.2, 3.0];
        assert!(rb.validate().is_err());

        let mut d = rb.clone();
        d.protocol = ProtocolTag::Rbard;
        d.params = params_rbard(0.4, 0.3, 0.0, 1.0, 4).unwrap();
        d.inputs = vec![0.1, 0.2, 0.3];
        d.start_rounds = vec![1, 3, 2];
        assert!(d.validate().is_ok());
        assert_eq!(d.s_max(), 2);
    }

    #[test]
    fn default_horizons() {
        let csc = DynamicSchedule::csc_random(6, 1).unwrap();
        let p = params_rbar(0.4, 0.4, 0.0, 1.0).unwrap();
        assert_eq!(TrialConfig::default_horizon(ProtocolTag::R, &p, &csc, 0), Some(20));
        assert_eq!(TrialConfig::default_horizon(ProtocolTag::Rbar, &p, &csc, 0), Some(4 * 8089 * 6));
        assert_eq!(TrialConfig::default_horizon(ProtocolTag::Rbard, &p, &csc, 5), Some(4 * 17));
        let blocking = DynamicSchedule::blocking_adversary(3, 4).unwrap();
        assert_eq!(TrialConfig::default_horizon(ProtocolTag::Rbar, &p, &blocking, 0), None);
    }

    #[test]
    fn protocol_tag_parsing() {
        assert_eq!("rbard".parse::<ProtocolTag>().unwrap(), ProtocolTag::Rbard);
        assert!("push-sum".parse::<ProtocolTag>().is_err());
        assert_eq!(serde_json::to_string(&ProtocolTag::Rbar).unwrap(), "\"rbar\"");
    }
}
