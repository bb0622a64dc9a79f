//! Property suites for the graph lemmas and the concentration bounds.
//!
//! Each suite runs a fixed number of seeded random cases and reports how
//! many violated the property. The CLI's `verify-graph` and `verify-bounds`
//! subcommands are thin wrappers around these.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{random_c_in_connected, random_gnp_strongly_connected, random_hamiltonian, DirectedGraph};
use crate::quantization::{dequantize, quantize};
use crate::sampling::{binomial_sigma, empirical_tail, sample_exponential, ConcentrationParams, Purpose, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// A random strongly connected graph with self-loops, alternating between
/// the Hamiltonian-backbone and the rejection-sampled generators.
fn random_sc(n: usize, rng: &mut ChaCha8Rng) -> Result<DirectedGraph> {
    if rng.random_bool(0.5) {
        let extra = rng.random_range(0..=n);
        random_hamiltonian(n, extra, rng)
    } else {
        random_gnp_strongly_connected(n, rng)
    }
}

/// The product of `n − 1` strongly connected self-looped graphs is complete.
pub fn product_completeness(max_n: usize, cases_per_n: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cases, mut failures) = (0, 0);
    for n in 2..=max_n {
        for _ in 0..cases_per_n {
            let graphs = (0..n - 1).map(|_| random_sc(n, &mut rng)).collect::<Result<Vec<_>>>()?;
            cases += 1;
            if !DirectedGraph::product_all(&graphs)?.is_complete() {
                failures += 1;
            }
        }
    }
    Ok(SuiteReport { name: "product of n-1 strongly connected graphs is complete".into(), cases, failures })
}

/// The product of `⌈n/c⌉` `c`-in-connected graphs is complete.
pub fn c_connected_speedup(max_n: usize, cs: &[usize], cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut total, mut failures) = (0, 0);
    for n in 2..=max_n {
        for &c in cs {
            let k = n.div_ceil(c);
            for _ in 0..cases {
                let graphs = (0..k).map(|_| random_c_in_connected(n, c, &mut rng)).collect::<Result<Vec<_>>>()?;
                total += 1;
                if !DirectedGraph::product_all(&graphs)?.is_complete() {
                    failures += 1;
                }
            }
        }
    }
    Ok(SuiteReport { name: "product of ceil(n/c) c-in-connected graphs is complete".into(), cases: total, failures })
}

/// `(G ∘ H) ∘ K = G ∘ (H ∘ K)`.
pub fn product_associativity(max_n: usize, cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for i in 0..cases {
        let n = 1 + i % max_n;
        let p = rng.random_range(0.0..0.6);
        let g = crate::graph::random_self_looped(n, p, &mut rng)?;
        let h = crate::graph::random_self_looped(n, p, &mut rng)?;
        let k = crate::graph::random_self_looped(n, p, &mut rng)?;
        if g.product(&h)?.product(&k)? != g.product(&h.product(&k)?)? {
            failures += 1;
        }
    }
    Ok(SuiteReport { name: "graph product is associative".into(), cases, failures })
}

/// Empirical behaviour of the minimum of independent exponentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinOfExponentials {
    pub samples: usize,
    pub total_rate: f64,
    pub mean: f64,
    /// `(x, empirical P[min > x], e^(−λx))`.
    pub survival: Vec<(f64, f64, f64)>,
}

impl MinOfExponentials {
    pub fn mean_relative_error(&self) -> f64 {
        (self.mean * self.total_rate - 1.0).abs()
    }

    pub fn max_survival_error(&self) -> f64 {
        self.survival.iter().map(|(_, e, a)| (e - a).abs()).fold(0.0, f64::max)
    }
}

pub fn min_of_exponentials(rates: &[f64], points: &[f64], samples: usize, seed: u64) -> Result<MinOfExponentials> {
    let mut streams: Vec<RngStream> =
        (0..rates.len()).map(|i| RngStream::for_agent(seed, 0, i, Purpose::Check(1))).collect();
    let mut mins = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut m = f64::INFINITY;
        for (rate, stream) in rates.iter().zip(streams.iter_mut()) {
            m = m.min(sample_exponential(*rate, stream)?);
        }
        mins.push(m);
    }
    let total_rate: f64 = rates.iter().sum();
    let mean = mins.iter().sum::<f64>() / samples as f64;
    let survival = points
        .iter()
        .map(|&x| {
            let above = mins.iter().filter(|&&m| m > x).count() as f64 / samples as f64;
            (x, above, (-total_rate * x).exp())
        })
        .collect();
    Ok(MinOfExponentials { samples, total_rate, mean, survival })
}

/// One concentration experiment compared with its analytic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub params: ConcentrationParams,
    pub reps: usize,
    pub frequency: f64,
    pub bound: f64,
    /// Allowed excess over the bound: `slack · σ`.
    pub slack: f64,
}

impl TailCheck {
    pub fn passed(&self) -> bool {
        self.frequency <= self.bound + self.slack
    }
}

pub fn tail_check(params: ConcentrationParams, reps: usize, sigmas: f64, stream: &mut RngStream) -> Result<TailCheck> {
    let frequency = empirical_tail(&params, reps, stream)?;
    let bound = params.bound();
    Ok(TailCheck { params, reps, frequency, bound, slack: sigmas * binomial_sigma(bound, reps) })
}

/// Tail checks over every `(ℓ, α)`, rate and rounding combination.
pub fn concentration_suite(
    ell_alpha: &[(usize, f64)],
    lambdas: &[f64],
    betas: &[Option<f64>],
    reps: usize,
    sigmas: f64,
    seed: u64,
) -> Result<Vec<TailCheck>> {
    let mut stream = RngStream::for_agent(seed, 0, 0, Purpose::Check(2));
    let mut out = Vec::new();
    for &(ell, alpha) in ell_alpha {
        for &lambda in lambdas {
            for &beta in betas {
                let cp = ConcentrationParams::new(ell, lambda, alpha, beta)?;
                out.push(tail_check(cp, reps, sigmas, &mut stream)?);
            }
        }
    }
    Ok(out)
}

/// Frequency of `Exp(λ)` samples outside `[z, ln 1/z]`, to compare with
/// `(1 + λ) z`.
pub fn admissible_tail(lambda: f64, z: f64, samples: usize, seed: u64) -> Result<f64> {
    let mut stream = RngStream::for_agent(seed, 0, 0, Purpose::Check(3));
    let upper = (1.0 / z).ln();
    let mut outside = 0usize;
    for _ in 0..samples {
        let x = sample_exponential(lambda, &mut stream)?;
        if x < z || x > upper {
            outside += 1;
        }
    }
    Ok(outside as f64 / samples as f64)
}

/// Random positive value spread over many orders of magnitude, plus a
/// rounding ratio in `[10⁻⁴, 4)`.
fn quant_case(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let x = 10f64.powf(rng.random_range(-12.0..12.0));
    let beta = 10f64.powf(rng.random_range(-4.0..0.6));
    (x, beta)
}

/// Bracketing, monotonicity, idempotence and min-commutation of the
/// logarithmic rounding, `cases` random cases each.
pub fn quantization_suites(cases: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = |name: &str, check: &mut dyn FnMut(&mut ChaCha8Rng) -> Result<bool>| -> Result<SuiteReport> {
        let mut failures = 0;
        for _ in 0..cases {
            if !check(&mut rng)? {
                failures += 1;
            }
        }
        Ok(SuiteReport { name: name.into(), cases, failures })
    };
    let bracketing = report("rounding brackets its argument", &mut |rng| {
        let (x, beta) = quant_case(rng);
        let q = quantize(x, beta)?;
        let lo = dequantize(q, beta);
        let hi = dequantize(crate::QuantExponent(q.get() + 1), beta);
        Ok(lo <= x && x < hi)
    })?;
    let monotone = report("rounding is monotone", &mut |rng| {
        let (x, beta) = quant_case(rng);
        // close pairs exercise level boundaries
        let y = if rng.random_bool(0.5) { x * (1.0 + rng.random_range(0.0..2.0 * beta)) } else { quant_case(rng).0 };
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        Ok(quantize(lo, beta)? <= quantize(hi, beta)?)
    })?;
    let idempotent = report("rounding is idempotent", &mut |rng| {
        let (x, beta) = quant_case(rng);
        let q = quantize(x, beta)?;
        Ok(quantize(dequantize(q, beta), beta)? == q)
    })?;
    let commutes = report("rounding commutes with min", &mut |rng| {
        let (x, beta) = quant_case(rng);
        let y = if rng.random_bool(0.5) { x * rng.random_range(0.5..2.0) } else { quant_case(rng).0 };
        Ok(quantize(x.min(y), beta)? == quantize(x, beta)?.min(quantize(y, beta)?))
    })?;
    Ok(vec![bracketing, monotone, idempotent, commutes])
}
