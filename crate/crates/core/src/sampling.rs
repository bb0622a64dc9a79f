//! Random streams, exponential variates and protocol parameters.
//!
//! Every agent owns private random streams keyed by
//! `(master seed, trial, agent, purpose)`. The key is the ChaCha seed, so
//! streams are independent of each other and need no shared state.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantization::{dequantize, quantize};
use crate::scalar::Scalar;

/// What a stream is used for. Distinct purposes never share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Samples whose minima estimate the translated input sum.
    SumSamples,
    /// Rate-1 samples whose minima estimate the network size.
    SizeSamples,
    /// Input values drawn by the harness.
    Inputs,
    /// Activation rounds drawn by the harness.
    StartRounds,
    /// Seeds of the communication schedule.
    Schedule,
    /// Free-standing statistical checks.
    Check(u64),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::SumSamples => 1,
            Purpose::SizeSamples => 2,
            Purpose::Inputs => 3,
            Purpose::StartRounds => 4,
            Purpose::Schedule => 5,
            Purpose::Check(k) => 0x1000 + k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub trial: u64,
    pub agent: u64,
    pub purpose: Purpose,
}

/// A deterministic random stream. Identical keys reproduce identical
/// sequences bit for bit.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: StreamKey,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(key: StreamKey) -> Self {
        let mut seed = [0u8; 32];
        let words = [key.master, key.trial, key.agent, key.purpose.code()];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        Self { key, rng: ChaCha12Rng::from_seed(seed) }
    }

    pub fn for_agent(master: u64, trial: u64, agent: usize, purpose: Purpose) -> Self {
        Self::new(StreamKey { master, trial, agent: agent as u64, purpose })
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform on `(0, 1]`: the generator's 0 is mapped to 1.
    pub fn uniform_open<T: Scalar>(&mut self) -> T {
        let u: f64 = self.rng.random();
        let u = T::of(u);
        if u == T::zero() {
            T::one()
        } else {
            u
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Inverse CDF of `Exp(rate)` at a uniform `u ∈ (0, 1]`.
#[inline]
pub fn exponential_from_uniform<T: Scalar>(rate: T, u: T) -> T {
    -u.ln() / rate
}

pub fn sample_exponential<T: Scalar>(rate: T, stream: &mut RngStream) -> Result<T> {
    if !(rate > T::zero()) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("exponential rate must be positive, got {rate}")));
    }
    let u = stream.uniform_open::<T>();
    Ok(exponential_from_uniform(rate, u))
}

/// `count` i.i.d. `Exp(rate)` samples.
pub fn sample_exponentials<T: Scalar>(rate: T, count: usize, stream: &mut RngStream) -> Result<Vec<T>> {
    (0..count).map(|_| sample_exponential(rate, stream)).collect()
}

/// Parameters shared by every agent of one protocol instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub epsilon: f64,
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    /// Number of sample replicas per agent.
    pub ell: usize,
    /// Logarithmic rounding ratio; absent for unquantized protocols.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Known upper bound on the network size; only the deciding protocol uses it.
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u64>,
}

impl ProtocolParams {
    /// Width `b − a + 1` of the translated input range `[1, b − a + 1]`.
    pub fn width(&self) -> f64 {
        self.b - self.a + 1.0
    }

    /// Replaces the replica count. Used for experiments on small vectors
    /// (for instance against the blocking adversary); the accuracy
    /// guarantees only hold for the formula value.
    pub fn with_ell(mut self, ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidParameter("ell must be positive".into()));
        }
        self.ell = ell;
        Ok(self)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.a && theta <= self.b
    }
}

fn validate(epsilon: f64, eta: f64, a: f64, b: f64) -> Result<()> {
    let open_half = |x: f64| x > 0.0 && x < 0.5;
    if !open_half(epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if !open_half(eta) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1/2), got {eta}")));
    }
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::InvalidParameter(format!("need finite a <= b, got [{a}, {b}]")));
    }
    Ok(())
}

/// `27 ln(4/η) (b−a+1)² / ε²` before the ceiling.
pub fn ell_r_exact(epsilon: f64, eta: f64, width: f64) -> f64 {
    27.0 * (4.0 / eta).ln() * width * width / (epsilon * epsilon)
}

/// `108 ln(8/η) (b−a+1)² / ε²` before the ceiling.
pub fn ell_rbar_exact(epsilon: f64, eta: f64, width: f64) -> f64 {
    108.0 * (8.0 / eta).ln() * width * width / (epsilon * epsilon)
}

/// The two branches `108 ln(24/η)(b−a+1)²/ε²` and `243 ln(6N²/η)` before
/// the ceiling.
pub fn ell_rbard_exact(epsilon: f64, eta: f64, width: f64, big_n: u64) -> (f64, f64) {
    let accuracy = 108.0 * (24.0 / eta).ln() * width * width / (epsilon * epsilon);
    let n = big_n as f64;
    let firing = 243.0 * (6.0 * n * n / eta).ln();
    (accuracy, firing)
}

/// `β = ε / (8 (b − a + 1))`.
pub fn rounding_ratio(epsilon: f64, width: f64) -> f64 {
    epsilon / (8.0 * width)
}

fn ceil_count(x: f64) -> usize {
    x.ceil() as usize
}

/// Parameters of the plain Min protocol: only the input range matters.
pub fn params_min(epsilon: f64, eta: f64, a: f64, b: f64) -> Result<ProtocolParams> {
    validate(epsilon, eta, a, b)?;
    Ok(ProtocolParams { epsilon, eta, a, b, ell: 1, beta: None, big_n: None })
}

pub fn params_r(epsilon: f64, eta: f64, a: f64, b: f64) -> Result<ProtocolParams> {
    validate(epsilon, eta, a, b)?;
    let ell = ceil_count(ell_r_exact(epsilon, eta, b - a + 1.0));
    Ok(ProtocolParams { epsilon, eta, a, b, ell, beta: None, big_n: None })
}

pub fn params_rbar(epsilon: f64, eta: f64, a: f64, b: f64) -> Result<ProtocolParams> {
    validate(epsilon, eta, a, b)?;
    let width = b - a + 1.0;
    let ell = ceil_count(ell_rbar_exact(epsilon, eta, width));
    Ok(ProtocolParams { epsilon, eta, a, b, ell, beta: Some(rounding_ratio(epsilon, width)), big_n: None })
}

pub fn params_rbard(epsilon: f64, eta: f64, a: f64, b: f64, big_n: u64) -> Result<ProtocolParams> {
    validate(epsilon, eta, a, b)?;
    if big_n < 1 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let width = b - a + 1.0;
    let (accuracy, firing) = ell_rbard_exact(epsilon, eta, width, big_n);
    let ell = ceil_count(accuracy).max(ceil_count(firing));
    Ok(ProtocolParams { epsilon, eta, a, b, ell, beta: Some(rounding_ratio(epsilon, width)), big_n: Some(big_n) })
}

/// Setup of one concentration experiment: `ell` samples of `Exp(lambda)`,
/// relative deviation `alpha`, optionally rounded with ratio `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    pub ell: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: Option<f64>,
}

impl ConcentrationParams {
    pub fn new(ell: usize, lambda: f64, alpha: f64, beta: Option<f64>) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidParameter("ell must be positive".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("rate must be positive, got {lambda}")));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1/2), got {alpha}")));
        }
        if let Some(beta) = beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
            }
        }
        Ok(Self { ell, lambda, alpha, beta })
    }

    /// Absolute deviation of the sample mean from `1/λ` that counts as a
    /// tail event: `α/λ`, or `(α + β + αβ)/λ` with rounding.
    pub fn threshold(&self) -> f64 {
        let rel = match self.beta {
            None => self.alpha,
            Some(beta) => self.alpha + beta + self.alpha * beta,
        };
        rel / self.lambda
    }

    /// `2 exp(−ℓα²/3)`; holds for both the rounded and unrounded events.
    pub fn bound(&self) -> f64 {
        2.0 * (-(self.ell as f64) * self.alpha * self.alpha / 3.0).exp()
    }
}

/// Fraction of `reps` experiments in which the sample mean deviates from
/// `1/λ` by at least [`ConcentrationParams::threshold`].
pub fn empirical_tail(cp: &ConcentrationParams, reps: usize, stream: &mut RngStream) -> Result<f64> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let threshold = cp.threshold();
    let mean_target = 1.0 / cp.lambda;
    let mut hits = 0usize;
    for _ in 0..reps {
        let mut total = 0.0f64;
        for _ in 0..cp.ell {
            let x: f64 = sample_exponential(cp.lambda, stream)?;
            total += match cp.beta {
                None => x,
                Some(beta) => dequantize::<f64>(quantize(x, beta)?, beta),
            };
        }
        if (total / cp.ell as f64 - mean_target).abs() >= threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / reps as f64)
}

/// Standard deviation of a frequency estimated from `trials` Bernoulli(p)
/// draws; `p` is clamped to `[0, 1]` so vacuous bounds stay meaningful.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(agent: usize, purpose: Purpose) -> RngStream {
        RngStream::for_agent(7, 0, agent, purpose)
    }

    #[test]
    fn inverse_cdf_with_injected_uniform() {
        let u = (-2.0f64).exp();
        assert!((exponential_from_uniform(1.0, u) - 2.0).abs() < 1e-15);
        assert!((exponential_from_uniform(2.0, u) - 1.0).abs() < 1e-15);
        assert_eq!(exponential_from_uniform(3.0f64, 1.0), 0.0);
    }

    #[test]
    fn rejects_non_positive_rate() {
        let mut s = stream(0, Purpose::Check(0));
        assert!(sample_exponential(0.0f64, &mut s).is_err());
        assert!(sample_exponential(-1.0f32, &mut s).is_err());
    }

    #[test]
    fn empirical_mean_at_rate_four() {
        let mut s = stream(0, Purpose::Check(1));
        let xs: Vec<f64> = sample_exponentials(4.0, 100_000, &mut s).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((0.2475..=0.2525).contains(&mean), "mean {mean}");
        assert!(xs.iter().all(|&x| x >= 0.0 && x.is_finite()));
    }

    #[test]
    fn f32_samples_are_finite() {
        let mut s = stream(0, Purpose::Check(2));
        let xs: Vec<f32> = sample_exponentials(1.5, 10_000, &mut s).unwrap();
        assert!(xs.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<f64> = sample_exponentials(1.0, 64, &mut stream(3, Purpose::SumSamples)).unwrap();
        let b: Vec<f64> = sample_exponentials(1.0, 64, &mut stream(3, Purpose::SumSamples)).unwrap();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        let c: Vec<f64> = sample_exponentials(1.0, 64, &mut stream(4, Purpose::SumSamples)).unwrap();
        let d: Vec<f64> = sample_exponentials(1.0, 64, &mut stream(3, Purpose::SizeSamples)).unwrap();
        assert_ne!(a, c);
        assert_ne!(a, d);

        let mut s = stream(0, Purpose::Inputs);
        assert_eq!(s.position(), 0);
        let _: f64 = s.uniform_open();
        assert!(s.position() > 0);
    }

    #[test]
    fn distinct_agent_streams_are_uncorrelated() {
        let pairs = 100_000;
        let mut s0 = stream(0, Purpose::SumSamples);
        let mut s1 = stream(1, Purpose::SumSamples);
        let xs: Vec<f64> = (0..pairs).map(|_| s0.uniform_open()).collect();
        let ys: Vec<f64> = (0..pairs).map(|_| s1.uniform_open()).collect();
        let mx = xs.iter().sum::<f64>() / pairs as f64;
        let my = ys.iter().sum::<f64>() / pairs as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho.abs() < 0.02, "rho {rho}");
    }

    // Expected values below were evaluated with 50-digit arithmetic; the
    // fractional parts are far enough from integers that f64 evaluation of
    // the same formulas cannot land on the other side of a ceiling.
    #[test]
    fn ell_for_r() {
        assert!(params_r(0.5, 0.2, 0.0, 1.0).is_err());
        assert!(params_r(0.3, 0.5, 0.0, 1.0).is_err());
        assert!(params_r(0.3, 0.2, 1.0, 0.0).is_err());
        let p = params_r(0.499, 0.499, 3.0, 3.0).unwrap();
        assert_eq!(p.ell, 226); // 225.697791163...
        assert_eq!(p.beta, None);
        let p = params_r(0.3, 0.2, 0.0, 1.0).unwrap();
        assert_eq!(p.ell, 3595); // 3594.878728264...
        assert!((ell_r_exact(0.3, 0.2, 2.0) - 3_594.878_728_264_789).abs() < 1e-8);
    }

    #[test]
    fn ell_for_rbar() {
        let p = params_rbar(0.4, 0.4, 0.0, 1.0).unwrap();
        assert_eq!(p.ell, 8089); // 8088.477138595...
        assert_eq!(p.beta, Some(0.025));
        let base = ell_rbar_exact(0.2, 0.1, 2.0);
        let doubled = ell_rbar_exact(0.2, 0.1, 4.0);
        assert!((doubled / base - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ell_for_rbard() {
        let p = params_rbard(0.4, 0.3, 0.0, 1.0, 12).unwrap();
        let (acc, fire) = ell_rbard_exact(0.4, 0.3, 2.0, 12);
        assert_eq!(acc.ceil() as usize, 11832); // 11831.471913619...
        assert_eq!(fire.ceil() as usize, 1936); // 1935.627574270...
        assert_eq!(p.ell, 11832);
        assert_eq!(p.big_n, Some(12));

        let p = params_rbard(0.4, 0.3, 0.0, 1.0, 1_000_000).unwrap();
        // the firing branch grows with N but the accuracy branch still wins here
        assert_eq!(p.ell, 11832);
        let (_, fire) = ell_rbard_exact(0.4, 0.3, 2.0, 1_000_000);
        assert_eq!(fire.ceil() as usize, 7443); // 7442.301073644...

        // a wide input range makes the accuracy branch dominate regardless of N
        let p = params_rbard(0.1, 0.3, 0.0, 9.0, 1).unwrap();
        assert_eq!(p.ell, ell_rbard_exact(0.1, 0.3, 10.0, 1).0.ceil() as usize);
        assert!(params_rbard(0.4, 0.3, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn params_serialize() {
        let p = params_rbard(0.4, 0.3, 0.0, 1.0, 12).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["N"], 12);
        assert_eq!(v["ell"], 11832);
        let back: ProtocolParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        let v = serde_json::to_value(params_r(0.3, 0.2, 0.0, 1.0).unwrap()).unwrap();
        assert!(v.get("beta").is_none());
    }

    #[test]
    fn concentration_bound_and_validation() {
        let cp = ConcentrationParams::new(100, 1.0, 0.2, None).unwrap();
        assert!((cp.bound() - 0.527_194_276_231_453_5).abs() < 1e-12);
        assert!((cp.threshold() - 0.2).abs() < 1e-15);
        let rounded = ConcentrationParams::new(100, 3.0, 0.2, Some(0.1)).unwrap();
        assert!((rounded.threshold() - 0.32 / 3.0).abs() < 1e-15);
        assert!(ConcentrationParams::new(100, 1.0, 0.5, None).is_err());
        assert!(ConcentrationParams::new(0, 1.0, 0.2, None).is_err());
        assert!(ConcentrationParams::new(10, 0.0, 0.2, None).is_err());
        assert!(ConcentrationParams::new(10, 1.0, 0.2, Some(0.0)).is_err());
    }

    #[test]
    fn empirical_tail_below_bound() {
        let mut s = stream(0, Purpose::Check(3));
        let cp = ConcentrationParams::new(100, 1.0, 0.2, None).unwrap();
        let f = empirical_tail(&cp, 10_000, &mut s).unwrap();
        assert!(f <= cp.bound(), "{f}");

        let cp = ConcentrationParams::new(100, 3.0, 0.2, Some(0.1)).unwrap();
        let f = empirical_tail(&cp, 10_000, &mut s).unwrap();
        assert!(f <= cp.bound(), "{f}");

        // one sample, tiny alpha: the event is almost sure, the bound vacuous
        let cp = ConcentrationParams::new(1, 1.0, 1e-6, None).unwrap();
        let f = empirical_tail(&cp, 2_000, &mut s).unwrap();
        assert!(f > 0.99 && f <= cp.bound());
        assert!(empirical_tail(&cp, 0, &mut s).is_err());
    }

    #[test]
    fn binomial_sigma_clamps() {
        assert_eq!(binomial_sigma(1.7, 100), 0.0);
        assert!((binomial_sigma(0.2, 200) - (0.16f64 / 200.0).sqrt()).abs() < 1e-15);
    }
}
