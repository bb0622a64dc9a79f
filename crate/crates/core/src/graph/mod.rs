//! Directed communication graphs.
//!
//! Edge convention, used throughout the crate: the ordered pair `(u, v)`
//! means that agent `v` receives the message broadcast by agent `u`.
//! Every graph carries a self-loop at each node; constructors add them.

mod random;
mod schedule;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use random::{random_c_in_connected, random_gnp_strongly_connected, random_hamiltonian, random_self_looped};
pub use schedule::{DynamicSchedule, ScheduleKind};

/// Largest node count accepted by [`DirectedGraph::is_c_in_connected`].
pub const MAX_SUBSET_CHECK_NODES: usize = 20;

/// One round's communication topology on nodes `0..n`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct DirectedGraph {
    n: usize,
    // row-major: adj[u * n + v] is the edge (u, v)
    adj: Vec<bool>,
}

impl DirectedGraph {
    /// Builds a graph from an edge list. Self-loops are added implicitly.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::self_loops(n)?;
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::EndpointOutOfRange { from: u, to: v, n });
            }
            g.adj[u * n + v] = true;
        }
        Ok(g)
    }

    pub fn self_loops(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut adj = vec![false; n * n];
        for u in 0..n {
            adj[u * n + u] = true;
        }
        Ok(Self { n, adj })
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        Ok(Self { n, adj: vec![true; n * n] })
    }

    /// Directed ring `0 → 1 → … → n−1 → 0`.
    pub fn ring(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|u| (u, (u + 1) % n)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    pub(crate) fn insert_edge(&mut self, u: usize, v: usize) {
        self.adj[u * self.n + v] = true;
    }

    /// Number of edges, self-loops included.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count()
    }

    /// All edges in row-major order, self-loops included.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.adj.iter().enumerate().filter(|(_, &e)| e).map(move |(i, _)| (i / n, i % n))
    }

    /// Agents whose messages `v` receives, `v` itself included.
    pub fn in_neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| self.has_edge(u, v))
    }

    pub fn out_neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.has_edge(u, v))
    }

    /// The product `self ∘ other`: `(u, w)` is an edge iff some `v` has
    /// `(u, v)` in `self` and `(v, w)` in `other`. This is two-round
    /// reachability when `self` is used first.
    pub fn product(&self, other: &DirectedGraph) -> Result<DirectedGraph> {
        if self.n != other.n {
            return Err(Error::NodeCountMismatch { left: self.n, right: other.n });
        }
        let n = self.n;
        let mut adj = vec![false; n * n];
        for u in 0..n {
            let row = &mut adj[u * n..(u + 1) * n];
            for v in self.out_neighbors(u) {
                for (w, slot) in row.iter_mut().enumerate() {
                    *slot |= other.has_edge(v, w);
                }
            }
        }
        Ok(DirectedGraph { n, adj })
    }

    /// Left-to-right product of a non-empty sequence of graphs.
    pub fn product_all<'a>(graphs: impl IntoIterator<Item = &'a DirectedGraph>) -> Result<DirectedGraph> {
        let mut iter = graphs.into_iter();
        let first = iter.next().ok_or_else(|| Error::InvalidParameter("empty product".into()))?.clone();
        iter.try_fold(first, |acc, g| acc.product(g))
    }

    /// Nodes reachable from `start` along edges.
    fn reach(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            for (y, seen_y) in seen.iter_mut().enumerate() {
                let edge = if forward { self.has_edge(x, y) } else { self.has_edge(y, x) };
                if edge && !*seen_y {
                    *seen_y = true;
                    stack.push(y);
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.reach(0, true).into_iter().all(|s| s) && self.reach(0, false).into_iter().all(|s| s)
    }

    pub fn is_complete(&self) -> bool {
        self.edge_count() == self.n * self.n
    }

    /// Every non-empty `S ⊆ V` has at least `min(c, |V∖S|)` in-neighbors
    /// outside `S`. Checked over all subsets, so `n` is capped at
    /// [`MAX_SUBSET_CHECK_NODES`].
    pub fn is_c_in_connected(&self, c: usize) -> Result<bool> {
        if c == 0 {
            return Err(Error::InvalidParameter("c must be positive".into()));
        }
        if self.n > MAX_SUBSET_CHECK_NODES {
            return Err(Error::GraphTooLarge { n: self.n, max: MAX_SUBSET_CHECK_NODES });
        }
        let n = self.n;
        let in_mask: Vec<u32> = (0..n).map(|v| self.in_neighbors(v).fold(0u32, |m, u| m | (1 << u))).collect();
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        for subset in 1..=full {
            let mut heard = 0u32;
            let mut bits = subset;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                heard |= in_mask[v];
                bits &= bits - 1;
            }
            let outside = (heard & !subset).count_ones() as usize;
            let need = c.min(n - subset.count_ones() as usize);
            if outside < need {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Debug for DirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<_> = self.edges().filter(|(u, v)| u != v).collect();
        f.debug_struct("DirectedGraph").field("n", &self.n).field("edges", &edges).finish()
    }
}

/// Wire form: self-loops are omitted on write and restored on read.
#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for DirectedGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        DirectedGraph::new(r.n, r.edges.into_iter().map(|[u, v]| (u, v)))
    }
}

impl From<DirectedGraph> for GraphRepr {
    fn from(g: DirectedGraph) -> Self {
        let edges = g.edges().filter(|(u, v)| u != v).map(|(u, v)| [u, v]).collect();
        GraphRepr { n: g.n, edges }
    }
}
