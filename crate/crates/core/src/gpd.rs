//! Generalized Pareto distribution on `[0, x^F)`.
//!
//! `H(x) = 1 - (1 + ξx/σ)₊^{-1/ξ}` for `ξ != 0` and `1 - exp(-x/σ)` for
//! `ξ = 0`. Shapes with `|ξ| < XI_ZERO_TOL` use the exponential branch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the shape is treated as exactly zero.
pub const XI_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGpd", into = "RawGpd")]
pub struct GpdParams {
    sigma: f64,
    xi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGpd {
    sigma: f64,
    xi: f64,
}

impl TryFrom<RawGpd> for GpdParams {
    type Error = Error;
    fn try_from(raw: RawGpd) -> Result<Self> {
        GpdParams::new(raw.sigma, raw.xi)
    }
}

impl From<GpdParams> for RawGpd {
    fn from(p: GpdParams) -> Self {
        RawGpd {
            sigma: p.sigma,
            xi: p.xi,
        }
    }
}

impl GpdParams {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("GPD scale must be positive, got {sigma}")));
        }
        if !xi.is_finite() {
            return Err(Error::invalid(format!("GPD shape must be finite, got {xi}")));
        }
        Ok(Self { sigma, xi })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    fn is_exponential(&self) -> bool {
        self.xi.abs() < XI_ZERO_TOL
    }

    /// `-σ/ξ` for negative shapes, `+∞` otherwise.
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 && !self.is_exponential() {
            -self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    /// Same shape, scale multiplied by `factor` (law of `factor · X`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.sigma * factor, self.xi)
    }

    /// `log Pr{X > x}`; `-∞` at or beyond the upper endpoint.
    pub fn log_sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.is_exponential() {
            return -x / self.sigma;
        }
        let z = self.xi * x / self.sigma;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -z.ln_1p() / self.xi
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.log_sf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        -self.log_sf(x).exp_m1()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.is_exponential() {
            return -self.sigma.ln() - x / self.sigma;
        }
        let z = self.xi * x / self.sigma;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -self.sigma.ln() - (1.0 + 1.0 / self.xi) * z.ln_1p()
    }

    /// Quantile at probability `q ∈ [0, 1)`; `q = 1` is only accepted for a
    /// bounded tail, where it returns the endpoint.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("quantile level {q} outside [0, 1]")));
        }
        if q == 1.0 {
            let end = self.upper_endpoint();
            if end.is_finite() {
                return Ok(end);
            }
            return Err(Error::Domain(
                "quantile at q = 1 is infinite for a non-negative shape".into(),
            ));
        }
        Ok(self.quantile_from_tail(1.0 - q))
    }

    /// Quantile written in terms of the exceedance probability `tail = 1 - q`,
    /// which keeps full relative precision deep in the tail.
    pub fn quantile_from_tail(&self, tail: f64) -> f64 {
        let log_tail = tail.ln();
        if self.is_exponential() {
            -self.sigma * log_tail
        } else {
            self.sigma * (-self.xi * log_tail).exp_m1() / self.xi
        }
    }

    /// Inverse-transform draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                // (0, 1]: a zero tail probability would map to the endpoint
                let tail = 1.0 - rng.random::<f64>();
                self.quantile_from_tail(tail)
            })
            .collect()
    }

    /// Law of `(X - u) | X > u`, which is `GPD(σ + ξu, ξ)`.
    pub fn threshold_stability(&self, u: f64) -> Result<Self> {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("threshold {u} must be non-negative")));
        }
        if u >= self.upper_endpoint() {
            return Err(Error::Domain(format!(
                "threshold {u} is not below the upper endpoint {}",
                self.upper_endpoint()
            )));
        }
        let xi = if self.is_exponential() { 0.0 } else { self.xi };
        Self::new(self.sigma + xi * u, self.xi)
    }
}
