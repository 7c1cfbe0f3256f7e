//! Peaks-over-threshold GPD fitting and stationary-bootstrap intervals.
//!
//! Likelihoods are maximised by profiling: for a fixed shape `ξ` each scale
//! solves its score equation `(1 + ξ) Σ x/(σ + ξx) = n` (a single root for
//! `ξ > -1`), and the outer search over `ξ` starts from the
//! probability-weighted-moment estimate.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpd::{GpdParams, XI_ZERO_TOL};
use crate::rng;
use crate::stats::quantile_unsorted;

pub const MIN_EXCEEDANCES: usize = 5;
/// Lower limit for the shape during optimisation; the likelihood is
/// unbounded below `ξ = -1`.
pub const XI_LOWER: f64 = -1.0 + 1e-6;
const XI_UPPER_MAX: f64 = 5.0;
const PWM_WINDOW: f64 = 0.5;
const GRID_STEP: f64 = 0.1;
const XI_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub params: GpdParams,
    pub threshold: f64,
    pub n_exceed: usize,
    pub loglik: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledFit {
    pub sigma_i: f64,
    pub sigma_j: f64,
    pub xi_common: f64,
    pub loglik: f64,
    pub threshold_i: f64,
    pub threshold_j: f64,
    pub n_exceed_i: usize,
    pub n_exceed_j: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCI {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub n_boot: usize,
    /// Replicates on which the statistic failed and which were left out.
    pub n_dropped: usize,
}

/// Empirical `p`-quantile threshold and the strictly positive excesses above it.
pub fn excesses(data: &[f64], p: f64) -> Result<(f64, Vec<f64>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("threshold probability must lie in [0, 1), got {p}")));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let u = quantile_unsorted(data, p);
    let exc: Vec<f64> = data.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
    Ok((u, exc))
}

/// GPD log-likelihood of excesses; `-∞` outside the parameter space or support.
pub fn gpd_loglik(exc: &[f64], sigma: f64, xi: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = exc.len() as f64;
    if xi.abs() < XI_ZERO_TOL {
        return -n * sigma.ln() - exc.iter().sum::<f64>() / sigma;
    }
    let mut s = 0.0;
    for &x in exc {
        let z = xi * x / sigma;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        s += z.ln_1p();
    }
    -n * sigma.ln() - (1.0 + 1.0 / xi) * s
}

/// Probability-weighted-moment estimates `(σ, ξ)` (Hosking–Wallis).
pub fn pwm_estimate(exc: &[f64]) -> (f64, f64) {
    let mut s = exc.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let a0 = s.iter().sum::<f64>() / n;
    // a1 = E[X (1 - F(X))] with plotting positions (i - 0.35)/n
    let a1 = s
        .iter()
        .enumerate()
        .map(|(i, &x)| x * (1.0 - (i as f64 + 0.65) / n))
        .sum::<f64>()
        / n;
    let denom = a0 - 2.0 * a1;
    if !(denom.abs() > 0.0) {
        return (a0.max(f64::MIN_POSITIVE), 0.0);
    }
    let xi = 2.0 - a0 / denom;
    let sigma = 2.0 * a0 * a1 / denom;
    if sigma > 0.0 && xi.is_finite() {
        (sigma, xi)
    } else {
        (a0.max(f64::MIN_POSITIVE), 0.0)
    }
}

/// One group of excesses inside a (possibly pooled) profile likelihood.
struct Group<'a> {
    exc: &'a [f64],
    max: f64,
    mean: f64,
}

impl<'a> Group<'a> {
    fn new(exc: &'a [f64]) -> Result<Self> {
        if exc.len() < MIN_EXCEEDANCES {
            return Err(Error::InsufficientData(format!(
                "{} exceedances, need at least {MIN_EXCEEDANCES}",
                exc.len()
            )));
        }
        let mean = exc.iter().sum::<f64>() / exc.len() as f64;
        let max = exc.iter().cloned().fold(0.0, f64::max);
        let var = exc.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        if !(var > 0.0) {
            return Err(Error::InsufficientData(
                "excesses have zero variance; the likelihood has no maximum".into(),
            ));
        }
        Ok(Self { exc, max, mean })
    }

    /// Scale maximising the likelihood at fixed `xi`, by safeguarded Newton
    /// on the (decreasing) score.
    fn profile_sigma(&self, xi: f64, start: f64) -> f64 {
        let n = self.exc.len() as f64;
        let score = |s: f64| -> (f64, f64) {
            let (mut g, mut dg) = (0.0, 0.0);
            for &x in self.exc {
                let t = 1.0 / (s + xi * x);
                g += x * t;
                dg -= x * t * t;
            }
            ((1.0 + xi) * g - n, (1.0 + xi) * dg)
        };
        let mut lo = if xi < 0.0 { -xi * self.max } else { 0.0 };
        let mut hi = self.mean.max(lo) * (2.0 + xi.abs());
        while score(hi).0 > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        let mut s = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
        for _ in 0..200 {
            let (g, dg) = score(s);
            if g > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - g / dg;
            let next = if newton > lo && newton < hi && newton.is_finite() {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - s).abs() <= 1e-14 * s || hi - lo <= 1e-14 * hi {
                return next;
            }
            s = next;
        }
        s
    }
}

struct Profile<'a> {
    groups: Vec<Group<'a>>,
}

impl Profile<'_> {
    /// Profile log-likelihood at `xi` and the maximising scales.
    fn eval(&self, xi: f64, starts: &[f64]) -> (f64, Vec<f64>) {
        let mut ll = 0.0;
        let mut sigmas = Vec::with_capacity(self.groups.len());
        for (g, &st) in self.groups.iter().zip(starts) {
            let s = g.profile_sigma(xi, st);
            ll += gpd_loglik(g.exc, s, xi);
            sigmas.push(s);
        }
        (ll, sigmas)
    }

    /// Maximise over `ξ ∈ [XI_LOWER, XI_UPPER_MAX]` starting near `xi0`.
    fn maximize(&self, xi0: f64, sigma0: &[f64]) -> (f64, Vec<f64>, f64, bool) {
        let mut lo = (xi0 - PWM_WINDOW).max(XI_LOWER);
        let mut hi = (xi0 + PWM_WINDOW).min(XI_UPPER_MAX).max(lo + 2.0 * GRID_STEP);
        let mut starts = sigma0.to_vec();
        loop {
            let k = ((hi - lo) / GRID_STEP).ceil().max(2.0) as usize;
            let grid: Vec<f64> = (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, &x) in grid.iter().enumerate() {
                let (ll, s) = self.eval(x, &starts);
                if ll > best.1 {
                    best = (i, ll);
                    starts = s;
                }
            }
            let i = best.0;
            let at_hi = i == k && hi < XI_UPPER_MAX;
            let at_lo = i == 0 && lo > XI_LOWER;
            if at_hi {
                lo = grid[i - 1];
                hi = (hi + 2.0 * PWM_WINDOW).min(XI_UPPER_MAX);
                continue;
            }
            if at_lo {
                hi = grid[1];
                lo = (lo - 2.0 * PWM_WINDOW).max(XI_LOWER);
                continue;
            }
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(k)];
            let (x, s, ll) = self.golden(a, b, &starts);
            let converged = x < XI_UPPER_MAX - 1e-6 && ll.is_finite();
            return (x, s, ll, converged);
        }
    }

    fn golden(&self, mut a: f64, mut b: f64, starts: &[f64]) -> (f64, Vec<f64>, f64) {
        const R: f64 = 0.618_033_988_749_894_9;
        let mut c = b - R * (b - a);
        let mut d = a + R * (b - a);
        let (mut fc, mut sc) = self.eval(c, starts);
        let (mut fd, mut sd) = self.eval(d, starts);
        while b - a > XI_TOL {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                sd = sc.clone();
                c = b - R * (b - a);
                (fc, sc) = self.eval(c, &sd);
            } else {
                a = c;
                c = d;
                fc = fd;
                sc = sd.clone();
                d = a + R * (b - a);
                (fd, sd) = self.eval(d, &sc);
            }
        }
        if fc >= fd { (c, sc, fc) } else { (d, sd, fd) }
    }
}

/// Maximum-likelihood GPD fit to excesses above the empirical `p`-quantile.
pub fn fit_gpd(data: &[f64], p: f64) -> Result<GpdFit> {
    let (u, exc) = excesses(data, p)?;
    fit_excesses(&exc, u)
}

/// Maximum-likelihood GPD fit to already-computed excesses.
pub fn fit_excesses(exc: &[f64], threshold: f64) -> Result<GpdFit> {
    let group = Group::new(exc)?;
    let (s0, x0) = pwm_estimate(exc);
    let profile = Profile { groups: vec![group] };
    let (xi, sigmas, ll, converged) = profile.maximize(x0, &[s0]);
    Ok(GpdFit {
        params: GpdParams::new(sigmas[0], xi)?,
        threshold,
        n_exceed: exc.len(),
        loglik: ll,
        converged,
    })
}

/// Joint fit of two series sharing the shape, each above its own
/// empirical `p`-quantile.
pub fn fit_gpd_pooled(data_i: &[f64], data_j: &[f64], p: f64) -> Result<PooledFit> {
    let (ui, ei) = excesses(data_i, p)?;
    let (uj, ej) = excesses(data_j, p)?;
    let gi = Group::new(&ei)?;
    let gj = Group::new(&ej)?;
    let (si, xi_i) = pwm_estimate(&ei);
    let (sj, xi_j) = pwm_estimate(&ej);
    let ni = ei.len() as f64;
    let nj = ej.len() as f64;
    let xi0 = (ni * xi_i + nj * xi_j) / (ni + nj);
    let profile = Profile { groups: vec![gi, gj] };
    let (xi, sigmas, ll, converged) = profile.maximize(xi0, &[si, sj]);
    Ok(PooledFit {
        sigma_i: sigmas[0],
        sigma_j: sigmas[1],
        xi_common: xi,
        loglik: ll,
        threshold_i: ui,
        threshold_j: uj,
        n_exceed_i: ei.len(),
        n_exceed_j: ej.len(),
        converged,
    })
}

/// Circular stationary-bootstrap resampling of time indices `0..len`:
/// blocks start uniformly and have Geometric lengths with mean `mean_block`.
pub fn stationary_indices<R: Rng + ?Sized>(len: usize, mean_block: f64, rng: &mut R) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::InsufficientData("cannot resample an empty series".into()));
    }
    if !(mean_block >= 1.0) {
        return Err(Error::invalid(format!("mean block length must be >= 1, got {mean_block}")));
    }
    let geom = Geometric::new(1.0 / mean_block)
        .map_err(|e| Error::invalid(format!("block length distribution: {e}")))?;
    let mut idx = Vec::with_capacity(len);
    while idx.len() < len {
        let start = rng.random_range(0..len);
        let block = 1 + geom.sample(rng) as usize;
        for k in 0..block.min(len - idx.len()) {
            idx.push((start + k) % len);
        }
    }
    Ok(idx)
}

/// Apply one index sequence to every series in a bundle.
pub fn resample_bundle(bundle: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    bundle
        .iter()
        .map(|s| idx.iter().map(|&i| s[i]).collect())
        .collect()
}

/// Settings shared by every stationary-bootstrap run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub mean_block: f64,
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(mean_block: f64, n_boot: usize, seed: u64) -> Self {
        Self {
            mean_block,
            n_boot,
            level: 0.95,
            seed,
        }
    }

    /// Index sequence of replicate `r`; a pure function of `(seed, r)`.
    pub fn replicate_indices(&self, len: usize, r: usize) -> Result<Vec<usize>> {
        stationary_indices(len, self.mean_block, &mut rng::stream(self.seed, r as u64))
    }

    fn validate(&self, bundle: &[Vec<f64>]) -> Result<usize> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!("confidence level must lie in (0, 1), got {}", self.level)));
        }
        if self.n_boot == 0 {
            return Err(Error::invalid("need at least one bootstrap replicate"));
        }
        let len = bundle.first().map_or(0, Vec::len);
        if bundle.iter().any(|s| s.len() != len) {
            return Err(Error::invalid("all series in a bootstrap bundle must share the time index"));
        }
        Ok(len)
    }

    /// Bootstrap a vector-valued statistic. Each replicate resamples every
    /// series with the same indices; a non-finite component marks that
    /// component as failed on that replicate. Components whose point value
    /// fails, or that fail on more than 10% of replicates, yield `None`.
    pub fn run_many<F>(&self, bundle: &[Vec<f64>], statistic: F) -> Result<Vec<Option<BootstrapCI>>>
    where
        F: Fn(&[Vec<f64>]) -> Vec<f64> + Sync,
    {
        let len = self.validate(bundle)?;
        let point = statistic(bundle);
        let k = point.len();
        let reps: Vec<Vec<f64>> = (0..self.n_boot)
            .into_par_iter()
            .map(|r| {
                let idx = self.replicate_indices(len, r).expect("validated bundle");
                statistic(&resample_bundle(bundle, &idx))
            })
            .collect();
        Ok((0..k)
            .map(|c| {
                if !point[c].is_finite() {
                    return None;
                }
                let vals: Vec<f64> = reps.iter().map(|r| r.get(c).copied().unwrap_or(f64::NAN)).collect();
                self.interval(point[c], vals).ok()
            })
            .collect())
    }

    /// Bootstrap a scalar statistic; errors if more than 10% of replicates fail.
    pub fn run<F>(&self, bundle: &[Vec<f64>], statistic: F) -> Result<BootstrapCI>
    where
        F: Fn(&[Vec<f64>]) -> Result<f64> + Sync,
    {
        let len = self.validate(bundle)?;
        let point = statistic(bundle)?;
        let vals: Vec<f64> = (0..self.n_boot)
            .into_par_iter()
            .map(|r| {
                let idx = self.replicate_indices(len, r).expect("validated bundle");
                statistic(&resample_bundle(bundle, &idx)).unwrap_or(f64::NAN)
            })
            .collect();
        self.interval(point, vals)
    }

    fn interval(&self, point: f64, vals: Vec<f64>) -> Result<BootstrapCI> {
        let total = vals.len();
        let mut ok: Vec<f64> = vals.into_iter().filter(|v| v.is_finite()).collect();
        let dropped = total - ok.len();
        if ok.is_empty() || dropped * 10 > total {
            return Err(Error::BootstrapFailures { dropped, total });
        }
        ok.sort_unstable_by(f64::total_cmp);
        let alpha = 0.5 * (1.0 - self.level);
        let lower = interpolated_quantile(&ok, alpha).min(point);
        let upper = interpolated_quantile(&ok, 1.0 - alpha).max(point);
        Ok(BootstrapCI {
            point,
            lower,
            upper,
            level: self.level,
            n_boot: total,
            n_dropped: dropped,
        })
    }
}

/// Percentile interval of a scalar statistic under the stationary bootstrap.
pub fn stationary_bootstrap<F>(
    bundle: &[Vec<f64>],
    mean_block: f64,
    n_boot: usize,
    seed: u64,
    statistic: F,
) -> Result<BootstrapCI>
where
    F: Fn(&[Vec<f64>]) -> Result<f64> + Sync,
{
    BootstrapConfig::new(mean_block, n_boot, seed).run(bundle, statistic)
}

/// Linear-interpolation quantile of sorted data.
fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}
