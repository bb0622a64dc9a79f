//! Dynamic graphs: one communication graph per round.
//!
//! A schedule is a pure function of its seed and the round number. It never
//! sees protocol randomness, which makes the adversary oblivious.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::random::{random_c_in_connected, random_hamiltonian};
use super::DirectedGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// The same graph every round.
    Fixed(DirectedGraph),
    /// Fresh random Hamiltonian cycle plus `k ∈ [0, n]` random edges each
    /// round; every graph is strongly connected.
    Csc,
    /// Fixed Hamiltonian cycle whose edges are split across `delay`
    /// consecutive rounds; every window of `delay` rounds has a strongly
    /// connected product.
    Delayed { delay: usize },
    /// Every graph is `c`-in-connected.
    CConnected { c: usize },
    /// Self-loops only on odd rounds, complete graph on even rounds. Defeats
    /// the entry rotation of the quantized protocol when `ell` is even.
    Blocking { ell: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct DynamicSchedule {
    n: usize,
    seed: u64,
    kind: ScheduleKind,
}

impl DynamicSchedule {
    pub fn fixed(graph: DirectedGraph) -> Self {
        Self { n: graph.n(), seed: 0, kind: ScheduleKind::Fixed(graph) }
    }

    pub fn csc_random(n: usize, seed: u64) -> Result<Self> {
        check_n(n)?;
        Ok(Self { n, seed, kind: ScheduleKind::Csc })
    }

    pub fn delayed(n: usize, delay: usize, seed: u64) -> Result<Self> {
        check_n(n)?;
        if delay == 0 {
            return Err(Error::InvalidParameter("delay must be at least 1".into()));
        }
        Ok(Self { n, seed, kind: ScheduleKind::Delayed { delay } })
    }

    pub fn c_connected(n: usize, c: usize, seed: u64) -> Result<Self> {
        check_n(n)?;
        DirectedGraph::self_loops(n)?.is_c_in_connected(c)?;
        Ok(Self { n, seed, kind: ScheduleKind::CConnected { c } })
    }

    pub fn blocking_adversary(n: usize, ell: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("blocking schedule needs n >= 2".into()));
        }
        if ell < 2 || !ell.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "blocking schedule needs an even vector length >= 2, got {ell}"
            )));
        }
        Ok(Self { n, seed: 0, kind: ScheduleKind::Blocking { ell } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn kind_tag(&self) -> &'static str {
        match self.kind {
            ScheduleKind::Fixed(_) => "fixed",
            ScheduleKind::Csc => "csc",
            ScheduleKind::Delayed { .. } => "delayed",
            ScheduleKind::CConnected { .. } => "c_connected",
            ScheduleKind::Blocking { .. } => "blocking",
        }
    }

    /// Number of rounds after which every agent has heard (transitively)
    /// from every other, when the schedule guarantees one.
    pub fn dissemination_bound(&self) -> Option<u64> {
        let n = self.n as u64;
        match &self.kind {
            ScheduleKind::Fixed(g) => g.is_strongly_connected().then(|| n.saturating_sub(1)),
            ScheduleKind::Csc => Some(n - 1),
            ScheduleKind::Delayed { delay } => Some(*delay as u64 * (n - 1)),
            ScheduleKind::CConnected { c } => Some(n.div_ceil(*c as u64).min(n - 1)),
            ScheduleKind::Blocking { .. } => None,
        }
    }

    /// Whether every individual graph is strongly connected.
    pub fn is_continuously_strongly_connected(&self) -> bool {
        match &self.kind {
            ScheduleKind::Fixed(g) => g.is_strongly_connected(),
            ScheduleKind::Csc | ScheduleKind::CConnected { .. } => true,
            ScheduleKind::Delayed { delay } => *delay == 1,
            ScheduleKind::Blocking { .. } => self.n == 1,
        }
    }

    fn round_rng(&self, t: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        rng
    }

    /// The communication graph of round `t` (rounds start at 1).
    pub fn graph_at(&self, t: u64) -> DirectedGraph {
        assert!(t >= 1, "rounds are numbered from 1");
        let n = self.n;
        match &self.kind {
            ScheduleKind::Fixed(g) => g.clone(),
            ScheduleKind::Csc => {
                let mut rng = self.round_rng(t);
                let extra = rng.random_range(0..=n);
                random_hamiltonian(n, extra, &mut rng).expect("n validated at construction")
            }
            ScheduleKind::Delayed { delay } => {
                // Stream 0 is never a round, so it holds the shared cycle.
                let mut backbone = self.round_rng(0);
                let cycle = random_hamiltonian(n, 0, &mut backbone).expect("n validated");
                let cycle_edges: Vec<(usize, usize)> = cycle.edges().filter(|(u, v)| u != v).collect();
                let class = ((t - 1) % *delay as u64) as usize;
                let mut g = DirectedGraph::self_loops(n).expect("n validated");
                for (j, &(u, v)) in cycle_edges.iter().enumerate() {
                    if j % delay == class {
                        g.insert_edge(u, v);
                    }
                }
                let mut rng = self.round_rng(t);
                let extra = rng.random_range(0..=n / 2);
                for _ in 0..extra {
                    g.insert_edge(rng.random_range(0..n), rng.random_range(0..n));
                }
                g
            }
            ScheduleKind::CConnected { c } => {
                let mut rng = self.round_rng(t);
                random_c_in_connected(n, *c, &mut rng).expect("parameters validated")
            }
            ScheduleKind::Blocking { .. } => {
                if t % 2 == 1 {
                    DirectedGraph::self_loops(n).expect("n validated")
                } else {
                    DirectedGraph::complete(n).expect("n validated")
                }
            }
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidParameter("schedule needs n >= 1".into()));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    kind: String,
    n: usize,
    seed: u64,
    #[serde(default)]
    params: Value,
}

fn param(params: &Value, key: &str) -> Result<usize> {
    params
        .get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::InvalidParameter(format!("schedule params missing integer `{key}`")))
}

impl TryFrom<ScheduleRepr> for DynamicSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        let s = match r.kind.as_str() {
            "fixed" => {
                let graph: DirectedGraph =
                    serde_json::from_value(r.params.get("graph").cloned().unwrap_or(Value::Null))
                        .map_err(|e| Error::InvalidParameter(format!("fixed schedule graph: {e}")))?;
                if graph.n() != r.n {
                    return Err(Error::NodeCountMismatch { left: r.n, right: graph.n() });
                }
                DynamicSchedule::fixed(graph)
            }
            "csc" => DynamicSchedule::csc_random(r.n, r.seed)?,
            "delayed" => DynamicSchedule::delayed(r.n, param(&r.params, "delay")?, r.seed)?,
            "c_connected" => DynamicSchedule::c_connected(r.n, param(&r.params, "c")?, r.seed)?,
            "blocking" => DynamicSchedule::blocking_adversary(r.n, param(&r.params, "ell")?)?,
            other => return Err(Error::InvalidParameter(format!("unknown schedule kind `{other}`"))),
        };
        Ok(s)
    }
}

impl From<DynamicSchedule> for ScheduleRepr {
    fn from(s: DynamicSchedule) -> Self {
        let params = match &s.kind {
            ScheduleKind::Fixed(g) => json!({ "graph": g }),
            ScheduleKind::Csc => json!({}),
            ScheduleKind::Delayed { delay } => json!({ "delay": delay }),
            ScheduleKind::CConnected { c } => json!({ "c": c }),
            ScheduleKind::Blocking { ell } => json!({ "ell": ell }),
        };
        ScheduleRepr { kind: s.kind_tag().to_string(), n: s.n, seed: s.seed, params }
    }
}
