//! Simulation of `R = ω₁X₁ + ω₂X₂` and transformed-quantile slope checks.
//!
//! Above a high quantile, `-log(1 - p)` is asymptotically linear in
//! `log r_p` (slope `1/ξ_R`), in `r_p` (slope `1/σ_R`) or in
//! `-log(r_F - r_p)` (slope `-1/ξ_R`), whatever the prefactor. The slope of
//! an OLS fit on simulated quantiles therefore checks a predicted
//! [`TailForm`] without knowing its constant.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::CopulaSpec;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{ols, quantile_index};
use crate::tailpredict::{predict_copula, MarginPair, PrefactorClass, Regime, TailForm};

/// Draws per generator stream. Fixed, so results depend only on `(seed, n)`
/// and not on the worker count.
pub const SHARD_LEN: usize = 1 << 18;
pub const P_GRID_MIN: f64 = 0.99;
pub const P_GRID_MAX: f64 = 0.9999;

/// Aggregation weights `ω₁ + ω₂ = 1`, `ωᵢ ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Weights {
    w1: f64,
    w2: f64,
}

impl Weights {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        if !(w1 > 0.0 && w1 < 1.0 && w2 > 0.0 && w2 < 1.0) {
            return Err(Error::invalid(format!("weights must lie in (0, 1), got ({w1}, {w2})")));
        }
        if (w1 + w2 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights must sum to 1, got {}", w1 + w2)));
        }
        Ok(Self { w1, w2 })
    }

    pub fn equal() -> Self {
        Self { w1: 0.5, w2: 0.5 }
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }
}

impl TryFrom<[f64; 2]> for Weights {
    type Error = Error;
    fn try_from(w: [f64; 2]) -> Result<Self> {
        Self::new(w[0], w[1])
    }
}

impl From<Weights> for [f64; 2] {
    fn from(w: Weights) -> Self {
        [w.w1, w.w2]
    }
}

/// Margins of the summands actually added: `ωᵢXᵢ ~ GPD(ωᵢσᵢ, ξᵢ)`, or the
/// margins themselves for the plain sum.
pub fn effective_margins(margins: &MarginPair, weights: Option<Weights>) -> Result<MarginPair> {
    match weights {
        Some(w) => margins.scaled(w.w1, w.w2),
        None => Ok(*margins),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSample {
    pub values: Vec<f64>,
    pub margins: MarginPair,
    pub spec: CopulaSpec,
    /// `None` is the plain sum `X₁ + X₂`.
    pub weights: Option<Weights>,
    pub seed: u64,
}

/// `n` draws of the summands `(ω₁X₁, ω₂X₂)` (or `(X₁, X₂)` without weights).
/// Each copula coordinate is pushed through the quantile of its
/// weight-scaled margin, so the weighted sum and the plain sum of rescaled
/// margins are the same computation.
pub fn simulate_components(
    margins: &MarginPair,
    spec: &CopulaSpec,
    weights: Option<Weights>,
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![(0.0, 0.0); n];
    fill_sharded(margins, spec, weights, seed, &mut out, |x1, x2| (x1, x2))?;
    Ok(out)
}

/// `n` draws of `R`; the same draws as [`simulate_components`], summed.
pub fn simulate_aggregate(
    margins: &MarginPair,
    spec: &CopulaSpec,
    weights: Option<Weights>,
    n: usize,
    seed: u64,
) -> Result<AggregateSample> {
    let mut values = vec![0.0; n];
    let spec = fill_sharded(margins, spec, weights, seed, &mut values, |x1, x2| x1 + x2)?;
    Ok(AggregateSample {
        values,
        margins: *margins,
        spec,
        weights,
        seed,
    })
}

fn fill_sharded<T: Send>(
    margins: &MarginPair,
    spec: &CopulaSpec,
    weights: Option<Weights>,
    seed: u64,
    out: &mut [T],
    combine: impl Fn(f64, f64) -> T + Sync,
) -> Result<CopulaSpec> {
    if out.is_empty() {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let spec = spec.validated()?;
    let eff = effective_margins(margins, weights)?;
    out.par_chunks_mut(SHARD_LEN).enumerate().for_each(|(shard, chunk)| {
        let mut rng = rng::stream(seed, shard as u64);
        for v in chunk.iter_mut() {
            let (t1, t2) = spec.draw_tails(&mut rng);
            *v = combine(
                eff.m1.quantile_from_tail(t1.max(f64::MIN_POSITIVE)),
                eff.m2.quantile_from_tail(t2.max(f64::MIN_POSITIVE)),
            );
        }
    });
    Ok(spec)
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::invalid("empty probability grid"));
    }
    if probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Domain("probabilities must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Type-1 (inverse empirical cdf) quantiles. Only the part of the sample
/// above the smallest requested level is sorted.
pub fn empirical_quantiles(values: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    check_probs(probs)?;
    if values.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let n = values.len();
    let pmin = probs.iter().cloned().fold(1.0, f64::min);
    let k0 = quantile_index(n, pmin);
    let mut buf = values.to_vec();
    buf.select_nth_unstable_by(k0, f64::total_cmp);
    let upper = &mut buf[k0..];
    upper.sort_unstable_by(f64::total_cmp);
    Ok(probs.iter().map(|&p| upper[quantile_index(n, p) - k0]).collect())
}

/// `k` equally spaced levels from `lo` to `hi` inclusive.
pub fn p_grid(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    if k < 2 || !(lo < hi) {
        return Err(Error::invalid(format!("need k >= 2 and lo < hi, got k = {k}, [{lo}, {hi}]")));
    }
    Ok((0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect())
}

/// 40 levels spanning `[0.99, 0.999]`.
pub fn default_p_grid() -> Vec<f64> {
    p_grid(0.99, 0.999, 40).expect("static grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// `log r_p`; slope `1/ξ_R`.
    LogR,
    /// `r_p`; slope `1/σ_R`.
    RawR,
    /// `-log(r_F - r_p)`; slope `-1/ξ_R`.
    NegLogDeficit,
}

impl Transform {
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Heavy => Self::LogR,
            Regime::Exponential => Self::RawR,
            Regime::Bounded => Self::NegLogDeficit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub probs: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub transform: Transform,
    pub transformed: Vec<f64>,
    /// Endpoint used by [`Transform::NegLogDeficit`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_f: Option<f64>,
    pub slope_estimate: f64,
    pub intercept: f64,
}

impl QuantileCurve {
    /// `ξ̂_R` for the log and deficit transforms, `σ̂_R` for the raw one.
    pub fn implied_parameter(&self) -> f64 {
        match self.transform {
            Transform::LogR | Transform::RawR => 1.0 / self.slope_estimate,
            Transform::NegLogDeficit => -1.0 / self.slope_estimate,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "r_p", "transformed_r_p"])?;
        for ((p, r), t) in self.probs.iter().zip(&self.quantiles).zip(&self.transformed) {
            w.write_record([p.to_string(), r.to_string(), t.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Regress `-log(1 - p)` on the regime's transform of the empirical
/// quantiles over `p_grid`.
pub fn slope_diagnostic(values: &[f64], predicted: &TailForm, p_grid: &[f64]) -> Result<QuantileCurve> {
    if p_grid.len() < 2 {
        return Err(Error::invalid("slope diagnostic needs at least two levels"));
    }
    if p_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("probability grid must be strictly increasing"));
    }
    if p_grid[0] < P_GRID_MIN - 1e-12 || p_grid[p_grid.len() - 1] > P_GRID_MAX + 1e-12 {
        return Err(Error::Domain(format!(
            "probability grid must lie within [{P_GRID_MIN}, {P_GRID_MAX}]"
        )));
    }
    let quantiles = empirical_quantiles(values, p_grid)?;
    let transform = Transform::for_regime(predicted.regime);
    let r_f = (transform == Transform::NegLogDeficit).then_some(predicted.r_f);
    let mut transformed = Vec::with_capacity(quantiles.len());
    for (&p, &r) in p_grid.iter().zip(&quantiles) {
        let t = match transform {
            Transform::LogR => {
                if !(r > 0.0) {
                    return Err(Error::Numerical(format!("quantile r_p = {r} at p = {p} is not positive")));
                }
                r.ln()
            }
            Transform::RawR => r,
            Transform::NegLogDeficit => {
                if r >= predicted.r_f {
                    return Err(Error::EndpointViolation {
                        p,
                        quantile: r,
                        endpoint: predicted.r_f,
                    });
                }
                -(predicted.r_f - r).ln()
            }
        };
        transformed.push(t);
    }
    let y: Vec<f64> = p_grid.iter().map(|&p| -(-p).ln_1p()).collect();
    let (slope, intercept) = ols(&transformed, &y);
    Ok(QuantileCurve {
        probs: p_grid.to_vec(),
        quantiles,
        transform,
        transformed,
        r_f,
        slope_estimate: slope,
        intercept,
    })
}

/// Relative tolerances for the implied parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub relative: f64,
    /// Used when the prefactor is linear in `r`, whose `log r` term biases
    /// the slope at finite levels.
    pub linear_in_r: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            relative: 0.10,
            linear_in_r: 0.15,
        }
    }
}

/// Survivor ratio `Pr{R > r_p} / exp(-r_p/σ)` against `[0.5, 2 C₁]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c1: f64,
    pub lower: f64,
    pub upper: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub margins: MarginPair,
    pub spec: CopulaSpec,
    pub weights: Option<Weights>,
    pub n: usize,
    pub seed: u64,
    pub prediction: TailForm,
    pub predicted: f64,
    pub implied: Option<f64>,
    pub relative_error: Option<f64>,
    pub tolerance: f64,
    pub sample_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<QuantileCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub pass: bool,
}

/// Check a simulated sample against a prediction for its (weighted)
/// margins. Endpoint violations produce a failing verdict, not an error.
pub fn verify_sample(
    sample: &AggregateSample,
    prediction: &TailForm,
    p_grid: &[f64],
    tol: Tolerance,
) -> Result<Verdict> {
    let tolerance = if prediction.prefactor_class == PrefactorClass::LinearInR {
        tol.linear_in_r
    } else {
        tol.relative
    };
    let sample_max = sample.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut verdict = Verdict {
        margins: sample.margins,
        spec: sample.spec,
        weights: sample.weights,
        n: sample.values.len(),
        seed: sample.seed,
        prediction: *prediction,
        predicted: prediction.key_parameter(),
        implied: None,
        relative_error: None,
        tolerance,
        sample_max,
        envelope: None,
        curve: None,
        failure: None,
        pass: false,
    };
    let curve = match slope_diagnostic(&sample.values, prediction, p_grid) {
        Ok(c) => c,
        Err(e @ Error::EndpointViolation { .. }) => {
            verdict.failure = Some(e.to_string());
            return Ok(verdict);
        }
        Err(e) => return Err(e),
    };
    let implied = curve.implied_parameter();
    let rel = (implied - verdict.predicted).abs() / verdict.predicted.abs();
    verdict.implied = Some(implied);
    verdict.relative_error = Some(rel);
    let mut failures = Vec::new();
    if !(rel <= tolerance) {
        failures.push(format!("relative error {rel:.4} exceeds tolerance {tolerance}"));
    }
    if prediction.regime == Regime::Bounded && sample_max >= prediction.r_f {
        failures.push(format!("sample maximum {sample_max} reaches the predicted endpoint {}", prediction.r_f));
    }
    if let (PrefactorClass::IntervalConstant, Some([_, c1]), Some(sigma)) =
        (prediction.prefactor_class, prediction.c_bounds, prediction.sigma_r)
    {
        let ratios: Vec<f64> = curve
            .probs
            .iter()
            .zip(&curve.quantiles)
            .map(|(&p, &r)| (1.0 - p) / (-r / sigma).exp())
            .collect();
        let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lower, upper) = (0.5, 2.0 * c1);
        let within = min_ratio >= lower && max_ratio <= upper;
        if !within {
            failures.push(format!("survivor ratio range [{min_ratio:.4}, {max_ratio:.4}] leaves [{lower}, {upper:.4}]"));
        }
        verdict.envelope = Some(Envelope {
            c1,
            lower,
            upper,
            min_ratio,
            max_ratio,
            within,
        });
    }
    verdict.curve = Some(curve);
    verdict.pass = failures.is_empty();
    if !verdict.pass {
        verdict.failure = Some(failures.join("; "));
    }
    Ok(verdict)
}

/// Predict the tail of `R` from the copula, simulate it and compare the
/// slope-implied parameter with the prediction.
pub fn verify_prediction(
    margins: &MarginPair,
    spec: &CopulaSpec,
    weights: Option<Weights>,
    n: usize,
    p_grid: &[f64],
    tol: Tolerance,
    seed: u64,
) -> Result<Verdict> {
    let prediction = predict_copula(&effective_margins(margins, weights)?, spec)?;
    let sample = simulate_aggregate(margins, spec, weights, n, seed)?;
    verify_sample(&sample, &prediction, p_grid, tol)
}
