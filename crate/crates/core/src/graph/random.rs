//! Random graph generators used by the schedules and the lemma suites.

use rand::seq::SliceRandom;
use rand::Rng;

use super::DirectedGraph;
use crate::error::{Error, Result};

/// A random Hamiltonian cycle plus `extra` uniformly drawn edges.
/// Always strongly connected.
pub fn random_hamiltonian(n: usize, extra: usize, rng: &mut impl Rng) -> Result<DirectedGraph> {
    let mut g = DirectedGraph::self_loops(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for i in 0..n {
        g.insert_edge(order[i], order[(i + 1) % n]);
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        g.insert_edge(u, v);
    }
    Ok(g)
}

/// Each non-loop edge present independently with probability `p`.
pub fn random_self_looped(n: usize, p: f64, rng: &mut impl Rng) -> Result<DirectedGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} not in [0, 1]")));
    }
    let mut g = DirectedGraph::self_loops(n)?;
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                g.insert_edge(u, v);
            }
        }
    }
    Ok(g)
}

/// Rejection sample: draws `G(n, p)` graphs until one is strongly connected.
/// `p` is drawn once per call in `[0.15, 0.6]` so the accepted graphs range
/// from sparse to dense; it creeps up on repeated failures so the loop ends.
pub fn random_gnp_strongly_connected(n: usize, rng: &mut impl Rng) -> Result<DirectedGraph> {
    let mut p: f64 = rng.random_range(0.15..0.6);
    loop {
        for _ in 0..64 {
            let g = random_self_looped(n, p, rng)?;
            if g.is_strongly_connected() {
                return Ok(g);
            }
        }
        p = (p + 0.05).min(1.0);
    }
}

/// Rejection sample of a `c`-in-connected graph. The complete graph is
/// `c`-in-connected for every `c`, and the edge probability rises towards 1
/// on repeated failures, so this terminates.
pub fn random_c_in_connected(n: usize, c: usize, rng: &mut impl Rng) -> Result<DirectedGraph> {
    if n > 1 {
        // Probe the parameters once so errors surface before sampling.
        DirectedGraph::self_loops(n)?.is_c_in_connected(c)?;
    } else {
        return DirectedGraph::self_loops(n);
    }
    let base = (c as f64 / (n - 1) as f64).min(1.0);
    let mut p: f64 = (base + rng.random_range(0.0..0.3)).min(1.0);
    loop {
        for _ in 0..64 {
            let g = random_self_looped(n, p, rng)?;
            if g.is_c_in_connected(c)? {
                return Ok(g);
            }
        }
        p = (p + 0.05).min(1.0);
    }
}
