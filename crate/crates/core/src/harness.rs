//! Monte Carlo experiments.
//!
//! An [`ExperimentConfig`] describes a batch of trials. Trial `i` derives
//! its schedule seed, inputs and activation rounds from streams keyed by
//! `(seed, i)`, runs, and is reduced to a [`TrialRecord`]. The [`Summary`]
//! is a fold over the records in trial order, so it does not depend on how
//! trials were scheduled across threads and can be recomputed from the
//! stored records.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    check_decision_spec, convergence_time, message_bits, run_trial, ProtocolTag, TrialConfig, TrialTrace,
};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, DynamicSchedule};
use crate::quantization::{admissible_interval, count_levels};
use crate::sampling::{
    binomial_sigma, params_min, params_r, params_rbar, params_rbard, ProtocolParams, Purpose, RngStream,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Communication schedule of an experiment. Random schedules get a fresh
/// seed per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Ring,
    Complete,
    Csc,
    Delayed {
        delay: usize,
    },
    CConnected {
        c: usize,
    },
    /// Uses the experiment's `ell` as the period.
    Blocking,
    Fixed {
        graph: DirectedGraph,
    },
}

impl ScheduleSpec {
    pub fn build(&self, n: usize, ell: usize, seed: u64) -> Result<DynamicSchedule> {
        match self {
            ScheduleSpec::Ring => Ok(DynamicSchedule::fixed(DirectedGraph::ring(n)?)),
            ScheduleSpec::Complete => Ok(DynamicSchedule::fixed(DirectedGraph::complete(n)?)),
            ScheduleSpec::Csc => DynamicSchedule::csc_random(n, seed),
            ScheduleSpec::Delayed { delay } => DynamicSchedule::delayed(n, *delay, seed),
            ScheduleSpec::CConnected { c } => DynamicSchedule::c_connected(n, *c, seed),
            ScheduleSpec::Blocking => DynamicSchedule::blocking_adversary(n, ell),
            ScheduleSpec::Fixed { graph } => {
                if graph.n() != n {
                    return Err(Error::NodeCountMismatch { left: n, right: graph.n() });
                }
                Ok(DynamicSchedule::fixed(graph.clone()))
            }
        }
    }
}

impl std::str::FromStr for ScheduleSpec {
    type Err = Error;

    /// `ring`, `complete`, `csc`, `blocking`, `delayed:T` or `c-connected:c`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        let number = || -> Result<usize> {
            arg.and_then(|a| a.parse().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("schedule `{s}` needs a positive integer argument")))
        };
        match name {
            "ring" => Ok(ScheduleSpec::Ring),
            "complete" => Ok(ScheduleSpec::Complete),
            "csc" => Ok(ScheduleSpec::Csc),
            "blocking" => Ok(ScheduleSpec::Blocking),
            "delayed" => Ok(ScheduleSpec::Delayed { delay: number()? }),
            "c-connected" | "c_connected" => Ok(ScheduleSpec::CConnected { c: number()? }),
            _ => Err(Error::InvalidParameter(format!("unknown schedule `{s}`"))),
        }
    }
}

fn default_sigmas() -> f64 {
    3.0
}

fn default_parallel() -> bool {
    true
}

/// A batch of trials. Serialized as the versioned JSON config of the
/// `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub trials: usize,
    pub protocol: ProtocolTag,
    pub n: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u64>,
    /// Overrides the replica count given by the parameter formulas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    pub schedule: ScheduleSpec,
    /// Fixed inputs; drawn uniformly from `[a, b]` per trial when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<f64>>,
    /// Last round with passive agents (deciding protocol only).
    #[serde(default)]
    pub s_max: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    pub seed: u64,
    /// Binomial slack multiplier of the statistical verdicts.
    #[serde(default = "default_sigmas")]
    pub slack_sigmas: f64,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config with the usual defaults: uniform inputs, synchronous
    /// starts, default horizon, 3σ slack.
    pub fn new(protocol: ProtocolTag, n: usize, epsilon: f64, eta: f64, schedule: ScheduleSpec) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            trials: 1,
            protocol,
            n,
            epsilon,
            eta,
            a: 0.0,
            b: 1.0,
            big_n: None,
            ell: None,
            schedule,
            inputs: None,
            s_max: 0,
            t_max: None,
            seed: 0,
            slack_sigmas: 3.0,
            parallel: true,
            records_path: None,
            summary_path: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema));
        }
        if self.trials < 1 {
            return bad("at least one trial is required".into());
        }
        if !(self.slack_sigmas >= 0.0) {
            return bad("slack multiplier must be non-negative".into());
        }
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if let Some(inputs) = &self.inputs {
            if inputs.len() != self.n {
                return bad(format!("{} inputs for n = {}", inputs.len(), self.n));
            }
        }
        if self.s_max > 0 && self.protocol != ProtocolTag::Rbard {
            return bad("staggered starts are only defined for rbard".into());
        }
        self.params()?;
        Ok(())
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        let (e, h, a, b) = (self.epsilon, self.eta, self.a, self.b);
        let p = match self.protocol {
            ProtocolTag::Min => params_min(e, h, a, b)?,
            ProtocolTag::R => params_r(e, h, a, b)?,
            ProtocolTag::Rbar => params_rbar(e, h, a, b)?,
            ProtocolTag::Rbard => {
                let big_n = self.big_n.unwrap_or(self.n as u64);
                if big_n < self.n as u64 {
                    return Err(Error::InvalidConfig(format!("N = {big_n} is below n = {}", self.n)));
                }
                params_rbard(e, h, a, b, big_n)?
            }
        };
        match self.ell {
            Some(ell) => p.with_ell(ell),
            None => Ok(p),
        }
    }

    /// The fully determined configuration of trial `index`.
    pub fn trial_config(&self, index: usize) -> Result<TrialConfig> {
        let trial = index as u64;
        let params = self.params()?;
        let schedule_seed = RngStream::for_agent(self.seed, trial, 0, Purpose::Schedule).next_u64();
        let schedule = self.schedule.build(self.n, params.ell, schedule_seed)?;

        let inputs = match &self.inputs {
            Some(v) => v.clone(),
            None => {
                let mut s = RngStream::for_agent(self.seed, trial, 0, Purpose::Inputs);
                (0..self.n).map(|_| if self.a < self.b { s.random_range(self.a..=self.b) } else { self.a }).collect()
            }
        };

        let start_rounds = if self.s_max == 0 {
            vec![1; self.n]
        } else {
            let mut s = RngStream::for_agent(self.seed, trial, 0, Purpose::StartRounds);
            let mut starts: Vec<u64> = (0..self.n).map(|_| s.random_range(1..=self.s_max + 1)).collect();
            // someone must still be passive in round s_max
            let late = s.random_range(0..self.n);
            starts[late] = self.s_max + 1;
            starts
        };

        let t_max = match self.t_max {
            Some(t) => t,
            None => TrialConfig::default_horizon(self.protocol, &params, &schedule, self.s_max)
                .ok_or_else(|| Error::InvalidConfig("schedule has no round bound; set t_max explicitly".into()))?,
        };

        Ok(TrialConfig {
            protocol: self.protocol,
            params,
            inputs,
            schedule,
            start_rounds,
            t_max,
            seed: self.seed,
            trial,
        })
    }

    /// Round by which estimates must be stationary and agreed, when the
    /// schedule and protocol guarantee one.
    pub fn time_bound(&self, cfg: &TrialConfig) -> Option<u64> {
        let spread = cfg.schedule.dissemination_bound()?;
        match self.protocol {
            ProtocolTag::Min | ProtocolTag::R => Some(spread.max(1)),
            ProtocolTag::Rbar => Some(cfg.params.ell as u64 * (spread + 1)),
            ProtocolTag::Rbard => None,
        }
    }
}

/// Outcome of the decision checks of one deciding trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub all_decided_by_bound: bool,
    pub identical: bool,
    pub valid: bool,
    /// Nobody decided while its minima were still changing.
    pub after_stationary: bool,
    pub irrevocable: bool,
    pub last_decision_round: Option<u64>,
}

impl DecisionRecord {
    pub fn correct(&self) -> bool {
        self.all_decided_by_bound && self.identical && self.valid && self.after_stationary
    }
}

/// Per-trial measurements, written as one JSON line per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub schedule_seed: u64,
    pub theta: f64,
    pub s_max: u64,
    pub agreement_round: Option<u64>,
    pub stationary_estimate: Option<f64>,
    pub within_epsilon: bool,
    pub convergence_time: Option<u64>,
    pub time_bound: Option<u64>,
    pub meets_time_bound: Option<bool>,
    pub decision: Option<DecisionRecord>,
    pub samples_in_interval: Option<bool>,
    pub distinct_exponents: usize,
    pub level_bound: Option<usize>,
    pub max_message_bits: u64,
    pub max_message_bits_without_decided_counters: u64,
}

impl TrialRecord {
    pub fn from_trace(exp: &ExperimentConfig, cfg: &TrialConfig, trace: &TrialTrace<f64>) -> Result<Self> {
        let eps = cfg.params.epsilon;
        let theta = trace.meta.theta;
        let n = trace.n();
        let stationary_estimate = trace.stationary_estimate();
        let within_epsilon = match cfg.protocol {
            // Min computes the minimum exactly
            ProtocolTag::Min => stationary_estimate == cfg.inputs.iter().copied().reduce(f64::min),
            _ => stationary_estimate.is_some_and(|x| (x - theta).abs() <= eps),
        };
        let agreement_round = trace.agreement_round();
        let time_bound = exp.time_bound(cfg);
        let meets_time_bound = time_bound.map(|b| b <= trace.horizon() && agreement_round.is_some_and(|t| t <= b));

        let decision = (cfg.protocol == ProtocolTag::Rbard).then(|| {
            let report = check_decision_spec(trace, eps);
            let bound = cfg.s_max() + 2 * n as u64;
            let finals: Vec<_> =
                trace.rounds.last().map(|r| r.agents.iter().map(|a| a.d).collect()).unwrap_or_default();
            DecisionRecord {
                all_decided_by_bound: report.termination && report.last_decision_round.is_some_and(|t| t <= bound),
                identical: finals.first().is_some_and(|f: &Option<f64>| f.is_some() && finals.iter().all(|d| d == f)),
                valid: report.validity,
                after_stationary: (0..n).all(|u| match trace.decision_round(u) {
                    Some(t) => t >= trace.last_info_change(u),
                    None => true,
                }),
                irrevocable: report.irrevocability,
                last_decision_round: report.last_decision_round,
            }
        });

        let (samples_in_interval, level_bound) = match (cfg.protocol, cfg.params.beta) {
            (ProtocolTag::Rbar | ProtocolTag::Rbard, Some(beta)) => {
                match admissible_interval(cfg.params.eta, cfg.params.ell, n, cfg.params.a, cfg.params.b) {
                    Ok(iv) => {
                        let inside = trace.sample_extent.is_some_and(|(lo, hi)| iv.contains(lo) && iv.contains(hi));
                        (Some(inside), Some(count_levels(iv.z, iv.upper, beta)?))
                    }
                    Err(_) => (None, None),
                }
            }
            _ => (None, None),
        };

        let bits = message_bits(trace);
        Ok(TrialRecord {
            trial: cfg.trial,
            schedule_seed: cfg.schedule.seed(),
            theta,
            s_max: cfg.s_max(),
            agreement_round,
            stationary_estimate,
            within_epsilon,
            convergence_time: convergence_time(trace, eps),
            time_bound,
            meets_time_bound,
            decision,
            samples_in_interval,
            distinct_exponents: trace.distinct_exponents,
            level_bound,
            max_message_bits: bits.max_message,
            max_message_bits_without_decided_counters: bits.max_message_without_decided_counters,
        })
    }

    fn quantization_ok(&self) -> Option<bool> {
        let inside = self.samples_in_interval?;
        Some(inside && self.level_bound.is_some_and(|q| self.distinct_exponents <= q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    /// `"<="` or `">="`: how `measured` is compared with `threshold`.
    pub comparison: String,
}

impl Verdict {
    fn at_most(measured: f64, threshold: f64) -> Self {
        Verdict { pass: measured <= threshold, measured, threshold, comparison: "<=".into() }
    }

    fn at_least(measured: f64, threshold: f64) -> Self {
        Verdict { pass: measured >= threshold, measured, threshold, comparison: ">=".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub protocol: ProtocolTag,
    pub n: usize,
    pub trials: usize,
    /// Fraction of trials whose stationary estimate (or decision) misses
    /// the band.
    pub failure_fraction: f64,
    pub mean_convergence_round: Option<f64>,
    pub max_convergence_round: Option<u64>,
    /// Last decision round → number of trials.
    pub decision_rounds: BTreeMap<u64, usize>,
    pub max_distinct_exponents: usize,
    pub max_message_bits: u64,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    /// Folds the per-trial records, in order, into the summary and its
    /// verdicts.
    pub fn from_records(exp: &ExperimentConfig, records: &[TrialRecord]) -> Summary {
        let trials = records.len();
        let k = exp.slack_sigmas;
        let frac = |count: usize| count as f64 / trials.max(1) as f64;

        let failures = records
            .iter()
            .filter(|r| match &r.decision {
                Some(d) => !(d.valid && d.identical && d.all_decided_by_bound),
                None => !r.within_epsilon,
            })
            .count();
        let failure_fraction = frac(failures);

        let conv: Vec<u64> = records.iter().filter_map(|r| r.convergence_time).collect();
        let mean_convergence_round = (!conv.is_empty()).then(|| conv.iter().sum::<u64>() as f64 / conv.len() as f64);
        let mut decision_rounds = BTreeMap::new();
        for r in records {
            if let Some(t) = r.decision.and_then(|d| d.last_decision_round) {
                *decision_rounds.entry(t).or_insert(0) += 1;
            }
        }

        let mut verdicts = BTreeMap::new();
        let eta = exp.eta;
        let with_slack = |p: f64| p + k * binomial_sigma(p, trials);
        match exp.protocol {
            ProtocolTag::Min => {
                verdicts.insert("exact_minimum".into(), Verdict::at_most(failure_fraction, 0.0));
            }
            ProtocolTag::R => {
                verdicts.insert("accuracy".into(), Verdict::at_most(failure_fraction, with_slack(eta)));
            }
            ProtocolTag::Rbar => {
                verdicts.insert("accuracy".into(), Verdict::at_most(failure_fraction, with_slack(eta / 2.0)));
                let ok = records.iter().filter(|r| r.quantization_ok() == Some(true)).count();
                let need = 1.0 - with_slack(eta / 2.0);
                verdicts.insert("quantization_levels".into(), Verdict::at_least(frac(ok), need));
            }
            ProtocolTag::Rbard => {
                let ok = records.iter().filter(|r| r.decision.is_some_and(|d| d.correct())).count();
                verdicts.insert("decision".into(), Verdict::at_least(frac(ok), 1.0 - with_slack(eta)));
                let irrevocable = records.iter().filter(|r| r.decision.is_some_and(|d| d.irrevocable)).count();
                verdicts.insert("irrevocability".into(), Verdict::at_least(frac(irrevocable), 1.0));
            }
        }
        let bounded: Vec<bool> = records.iter().filter_map(|r| r.meets_time_bound).collect();
        if !bounded.is_empty() {
            let met = bounded.iter().filter(|&&b| b).count();
            verdicts.insert("time_bound".into(), Verdict::at_least(met as f64 / bounded.len() as f64, 1.0));
        }

        Summary {
            protocol: exp.protocol,
            n: exp.n,
            trials,
            failure_fraction,
            mean_convergence_round,
            max_convergence_round: conv.iter().copied().max(),
            decision_rounds,
            max_distinct_exponents: records.iter().map(|r| r.distinct_exponents).max().unwrap_or(0),
            max_message_bits: records.iter().map(|r| r.max_message_bits).max().unwrap_or(0),
            verdicts,
        }
    }

    /// Writes the summary as CSV with the fixed columns
    /// `kind,name,value,threshold,comparison,pass`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "name", "value", "threshold", "comparison", "pass"])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        let metrics: [(&str, String); 7] = [
            ("protocol", self.protocol.as_str().to_string()),
            ("n", self.n.to_string()),
            ("trials", self.trials.to_string()),
            ("failure_fraction", self.failure_fraction.to_string()),
            ("mean_convergence_round", opt(self.mean_convergence_round.map(|v| v.to_string()))),
            ("max_convergence_round", opt(self.max_convergence_round.map(|v| v.to_string()))),
            ("max_distinct_exponents", self.max_distinct_exponents.to_string()),
        ];
        for (name, value) in metrics {
            w.write_record(["metric", name, &value, "", "", ""])?;
        }
        w.write_record(["metric", "max_message_bits", &self.max_message_bits.to_string(), "", "", ""])?;
        for (round, count) in &self.decision_rounds {
            w.write_record(["decision_round", &round.to_string(), &count.to_string(), "", "", ""])?;
        }
        for (name, v) in &self.verdicts {
            w.write_record([
                "verdict",
                name,
                &v.measured.to_string(),
                &v.threshold.to_string(),
                &v.comparison,
                if v.pass { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of a batch: per-trial records plus their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

fn run_one(exp: &ExperimentConfig, index: usize) -> Result<TrialRecord> {
    let cfg = exp.trial_config(index)?;
    let trace = run_trial(&cfg)?;
    TrialRecord::from_trace(exp, &cfg, &trace)
}

/// Runs every trial and folds the records into a [`Summary`]. Writes the
/// JSON Lines records and the JSON summary when the config names paths.
pub fn monte_carlo(exp: &ExperimentConfig) -> Result<Experiment> {
    exp.validate()?;
    let records: Vec<TrialRecord> = if exp.parallel {
        (0..exp.trials).into_par_iter().map(|i| run_one(exp, i)).collect::<Result<_>>()?
    } else {
        (0..exp.trials).map(|i| run_one(exp, i)).collect::<Result<_>>()?
    };
    let summary = Summary::from_records(exp, &records);
    if let Some(path) = &exp.records_path {
        write_records(path, &records)?;
    }
    if let Some(path) = &exp.summary_path {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &summary)?;
        writeln!(w)?;
    }
    Ok(Experiment { records, summary })
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}
