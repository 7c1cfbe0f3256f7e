//! Rank-based estimates of the extremal dependence coefficients `χ` and `η`.
//!
//! Both estimators first map each margin to pseudo-uniforms `rank/(n+1)`
//! (average ranks for ties), so they are invariant under strictly increasing
//! marginal transformations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{average_ranks, quantile_unsorted};

/// Default threshold probability for `η` estimation.
pub const DEFAULT_ETA_Q: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceEstimate {
    pub value: f64,
    pub threshold_q: f64,
    pub n_exceed: usize,
    /// Sampling standard error when available (binomial for `χ̂`,
    /// bootstrap-filled for `η̂`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// Set when the raw estimate fell outside the admissible range and was
    /// clamped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub clamped: bool,
}

fn pseudo_uniforms(sample: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let n1 = sample.len() as f64 + 1.0;
    let x: Vec<f64> = sample.iter().map(|p| p.0).collect();
    let y: Vec<f64> = sample.iter().map(|p| p.1).collect();
    let u = average_ranks(&x).into_iter().map(|r| r / n1).collect();
    let v = average_ranks(&y).into_iter().map(|r| r / n1).collect();
    (u, v)
}

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("threshold probability must lie in (0, 1), got {q}")))
    }
}

/// Finite-level `χ(q) = Pr{Û > q | V̂ > q}`.
pub fn chi_empirical(sample: &[(f64, f64)], q: f64) -> Result<DependenceEstimate> {
    check_level(q)?;
    let (u, v) = pseudo_uniforms(sample);
    let mut cond = 0usize;
    let mut joint = 0usize;
    for (a, b) in u.iter().zip(&v) {
        if *b > q {
            cond += 1;
            if *a > q {
                joint += 1;
            }
        }
    }
    if cond == 0 {
        return Err(Error::InsufficientData(format!(
            "no exceedances of q = {q} in the conditioning margin"
        )));
    }
    let chi = joint as f64 / cond as f64;
    Ok(DependenceEstimate {
        value: chi,
        threshold_q: q,
        n_exceed: cond,
        stderr: Some((chi * (1.0 - chi) / cond as f64).sqrt()),
        clamped: false,
    })
}

/// Rank transform of one margin to standard exponential scale,
/// `-log(1 - rank/(n+1))`.
pub fn exponential_scores(x: &[f64]) -> Vec<f64> {
    let n1 = x.len() as f64 + 1.0;
    average_ranks(x).into_iter().map(|r| -(-r / n1).ln_1p()).collect()
}

/// Mean-excess estimate of `η` from the structure variable
/// `T = min(E₁, E₂)` on standard exponential margins: above a high
/// threshold `T` is approximately exponential with mean `η`.
pub fn eta_estimate(sample: &[(f64, f64)], q: f64) -> Result<DependenceEstimate> {
    check_level(q)?;
    let x: Vec<f64> = sample.iter().map(|p| p.0).collect();
    let y: Vec<f64> = sample.iter().map(|p| p.1).collect();
    eta_from_scores(&exponential_scores(&x), &exponential_scores(&y), q)
}

/// [`eta_estimate`] on margins already passed through [`exponential_scores`].
pub fn eta_from_scores(e1: &[f64], e2: &[f64], q: f64) -> Result<DependenceEstimate> {
    check_level(q)?;
    if e1.len() != e2.len() {
        return Err(Error::invalid("score vectors differ in length"));
    }
    let t: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a.min(*b)).collect();
    if t.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let thr = quantile_unsorted(&t, q);
    let (sum, count) = t
        .iter()
        .filter(|&&x| x > thr)
        .fold((0.0, 0usize), |(s, c), &x| (s + (x - thr), c + 1));
    if count == 0 {
        return Err(Error::InsufficientData(format!(
            "no exceedances of the structure variable above its {q}-quantile"
        )));
    }
    let raw = sum / count as f64;
    let value = raw.clamp(f64::MIN_POSITIVE, 1.0);
    Ok(DependenceEstimate {
        value,
        threshold_q: q,
        n_exceed: count,
        stderr: None,
        clamped: value != raw,
    })
}
