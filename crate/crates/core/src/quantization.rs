//! Logarithmic rounding.
//!
//! A positive value `x` is rounded down to the previous integer power of
//! `1 + β`. Rounded values are carried as their integer exponents, so the
//! minimum of rounded values is an integer comparison and a quantization
//! level is exactly one exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The exponent `k` of a rounded value `(1 + β)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantExponent(pub i32);

impl QuantExponent {
    pub fn get(self) -> i32 {
        self.0
    }
}

fn check_beta<T: Scalar>(beta: T) -> Result<T> {
    let base = T::one() + beta;
    if !(beta > T::zero()) || !beta.is_finite() || !(base > T::one()) {
        return Err(Error::InvalidParameter(format!("rounding ratio must be positive and representable, got {beta}")));
    }
    Ok(base)
}

/// `(1 + β)^k`.
#[inline]
pub fn dequantize<T: Scalar>(q: QuantExponent, beta: T) -> T {
    (T::one() + beta).powi(q.0)
}

/// `⌊log_{1+β} x⌋`, corrected so that
/// `dequantize(k) ≤ x < dequantize(k + 1)` holds exactly in floating point.
pub fn quantize<T: Scalar>(x: T, beta: T) -> Result<QuantExponent> {
    let base = check_beta(beta)?;
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("can only round positive finite values, got {x}")));
    }
    let estimate = (x.ln() / base.ln()).floor();
    let mut k = estimate.to_i32().ok_or_else(|| Error::InvalidParameter(format!("exponent of {x} out of range")))?;
    // ln/ln may land one step off at or near exact powers.
    while base.powi(k) > x {
        k -= 1;
    }
    while base.powi(k + 1) <= x {
        k += 1;
    }
    Ok(QuantExponent(k))
}

/// Number of distinct exponents taken by values in `[c, d]`:
/// `⌊log_{1+β} d⌋ − ⌊log_{1+β} c⌋ + 1`.
pub fn count_levels<T: Scalar>(c: T, d: T, beta: T) -> Result<usize> {
    if !(c > T::zero() && c <= d) {
        return Err(Error::InvalidParameter(format!("need 0 < c <= d, got [{c}, {d}]")));
    }
    let lo = quantize(c, beta)?.0 as i64;
    let hi = quantize(d, beta)?.0 as i64;
    Ok((hi - lo + 1) as usize)
}

/// Interval `[z, ln 1/z]` with `z = η / (4 (b − a + 2) ℓ n)`, which holds
/// every generated sample with probability at least `1 − η/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleInterval {
    pub z: f64,
    pub upper: f64,
}

impl AdmissibleInterval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.z && x <= self.upper
    }
}

pub fn admissible_interval(eta: f64, ell: usize, n: usize, a: f64, b: f64) -> Result<AdmissibleInterval> {
    if !(eta > 0.0) || ell == 0 || n == 0 || !(b - a + 2.0 > 0.0) {
        return Err(Error::InvalidParameter("admissible interval needs positive η, ℓ, n and b − a + 2".into()));
    }
    let z = eta / (4.0 * (b - a + 2.0) * ell as f64 * n as f64);
    if z >= 1.0 / 16.0 {
        return Err(Error::InvalidParameter(format!("z = {z} must be below 1/16")));
    }
    Ok(AdmissibleInterval { z, upper: (1.0 / z).ln() })
}
