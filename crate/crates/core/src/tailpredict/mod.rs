//! First-order upper tail of `R = X₁ + X₂`.
//!
//! `Pr{R ≥ r}` is classified into one of three forms as `r → r^F`:
//!
//! | regime      | form                         | parameter |
//! |-------------|------------------------------|-----------|
//! | Heavy       | `K₁ r^{-1/ξ_R}`              | `ξ_R > 0` |
//! | Exponential | `K₂ exp(-r/σ_R)`             | `σ_R`     |
//! | Bounded     | `K₃ (1 - r/r^F)^{-1/ξ_R}`    | `ξ_R < 0`, `r^F` |
//!
//! Two routes produce a [`TailForm`]: [`predict_theorem`] works from the
//! limiting joint-survivor description ([`LtDescriptor`]) and
//! [`predict_copula`] from a concrete [`CopulaSpec`]. The constants `Kᵢ` are
//! never evaluated; only the prefactor class is recorded.

mod search;

pub use search::{maximize_unit_interval, maximize_unit_interval_with, DEFAULT_GRID};

use serde::{Deserialize, Serialize};

use crate::copulas::{v_function_logistic, CopulaSpec};
use crate::error::{Error, Result};
use crate::gpd::GpdParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Heavy,
    Exponential,
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrefactorClass {
    Constant,
    /// `r exp(-r/σ_R)`-type prefactor (or another non-constant, regularly
    /// varying one); the tail is still in the exponential domain with scale
    /// `σ_R`.
    LinearInR,
    /// Constant only known to lie in `c_bounds`.
    IntervalConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailForm {
    pub regime: Regime,
    #[serde(rename = "xi_R")]
    pub xi_r: Option<f64>,
    #[serde(rename = "sigma_R")]
    pub sigma_r: Option<f64>,
    #[serde(rename = "r_F", with = "extended_real")]
    pub r_f: f64,
    pub prefactor_class: PrefactorClass,
    pub c_bounds: Option<[f64; 2]>,
}

impl TailForm {
    pub fn heavy(xi_r: f64) -> Self {
        debug_assert!(xi_r > 0.0);
        Self {
            regime: Regime::Heavy,
            xi_r: Some(xi_r),
            sigma_r: None,
            r_f: f64::INFINITY,
            prefactor_class: PrefactorClass::Constant,
            c_bounds: None,
        }
    }

    pub fn exponential(sigma_r: f64, prefactor_class: PrefactorClass) -> Self {
        Self {
            regime: Regime::Exponential,
            xi_r: None,
            sigma_r: Some(sigma_r),
            r_f: f64::INFINITY,
            prefactor_class,
            c_bounds: None,
        }
    }

    pub fn bounded(xi_r: f64, r_f: f64) -> Self {
        debug_assert!(xi_r < 0.0 && r_f.is_finite());
        Self {
            regime: Regime::Bounded,
            xi_r: Some(xi_r),
            sigma_r: None,
            r_f,
            prefactor_class: PrefactorClass::Constant,
            c_bounds: None,
        }
    }

    /// Theorem-4 style exponential tail with constant in `[1, c1]`.
    pub fn exponential_interval(sigma_r: f64, c1: f64) -> Self {
        Self {
            c_bounds: Some([1.0, c1]),
            ..Self::exponential(sigma_r, PrefactorClass::IntervalConstant)
        }
    }

    /// The regime's scalar parameter: `ξ_R` for Heavy/Bounded, `σ_R` for
    /// Exponential.
    pub fn key_parameter(&self) -> f64 {
        match self.regime {
            Regime::Exponential => self.sigma_r.unwrap_or(f64::NAN),
            _ => self.xi_r.unwrap_or(f64::NAN),
        }
    }

    /// Maximum absolute difference over all numeric fields, `∞` if the
    /// categorical fields differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.regime != other.regime
            || self.prefactor_class != other.prefactor_class
            || self.xi_r.is_some() != other.xi_r.is_some()
            || self.sigma_r.is_some() != other.sigma_r.is_some()
            || self.c_bounds.is_some() != other.c_bounds.is_some()
            || self.r_f.is_finite() != other.r_f.is_finite()
        {
            return f64::INFINITY;
        }
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => 0.0,
        };
        let mut d = opt(self.xi_r, other.xi_r).max(opt(self.sigma_r, other.sigma_r));
        if self.r_f.is_finite() {
            d = d.max((self.r_f - other.r_f).abs());
        }
        if let (Some(a), Some(b)) = (self.c_bounds, other.c_bounds) {
            d = d.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
        d
    }
}

/// Serialises `±∞` as the strings `"inf"`/`"-inf"` and finite values as numbers.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPair {
    pub m1: GpdParams,
    pub m2: GpdParams,
}

impl MarginPair {
    pub fn new(m1: GpdParams, m2: GpdParams) -> Self {
        Self { m1, m2 }
    }

    pub fn from_params(sigma1: f64, xi1: f64, sigma2: f64, xi2: f64) -> Result<Self> {
        Ok(Self::new(GpdParams::new(sigma1, xi1)?, GpdParams::new(sigma2, xi2)?))
    }

    /// Margins of `(ω₁X₁, ω₂X₂)`.
    pub fn scaled(&self, w1: f64, w2: f64) -> Result<Self> {
        Ok(Self::new(self.m1.scaled(w1)?, self.m2.scaled(w2)?))
    }

    /// `x₁^F + x₂^F`.
    pub fn endpoint_sum(&self) -> f64 {
        self.m1.upper_endpoint() + self.m2.upper_endpoint()
    }
}

/// Which regularity condition on the ray function `g` is asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Density factorises for large `R` (exponential margins).
    Cond1,
    /// `g(w) ~ K_g w^κ` at both ends, `0 ≤ κ < 1/(2η)`.
    Cond2,
    /// Boundary behaviour through a homogeneous `H`; `H₁₂` power tails.
    Cond3a,
    /// Boundary behaviour through `H` with `H₁(1, ∞) < ∞`, `H₁(1, z) → 0`.
    Cond3b,
}

impl std::str::FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cond1" | "1" => Ok(Self::Cond1),
            "cond2" | "2" => Ok(Self::Cond2),
            "cond3a" | "3a" => Ok(Self::Cond3a),
            "cond3b" | "3b" => Ok(Self::Cond3b),
            other => Err(Error::invalid(format!("unknown condition '{other}'"))),
        }
    }
}

/// Limiting joint-survivor description: `η`, optional `κ`, and the asserted
/// condition on `g`. The slowly varying part is taken constant and absorbed
/// into `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LtDescriptor {
    pub eta: Option<f64>,
    pub kappa: Option<f64>,
    pub condition: Condition,
}

impl LtDescriptor {
    pub fn new(eta: Option<f64>, kappa: Option<f64>, condition: Condition) -> Result<Self> {
        if let Some(eta) = eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")));
            }
            if let Some(k) = kappa {
                if !(k >= 0.0 && k < 1.0 / (2.0 * eta)) {
                    return Err(Error::invalid(format!(
                        "kappa must satisfy 0 <= kappa < 1/(2 eta) = {}, got {k}",
                        1.0 / (2.0 * eta)
                    )));
                }
            }
        }
        Ok(Self { eta, kappa, condition })
    }

    fn require_eta(&self, case: &str) -> Result<f64> {
        let eta = self.eta.ok_or_else(|| {
            Error::precondition(format!("{case} needs eta, but the dependence descriptor has none"))
        })?;
        if eta < 0.5 {
            return Err(Error::precondition(format!(
                "{case} assumes non-negative association (eta >= 1/2), got eta = {eta}"
            )));
        }
        Ok(eta)
    }

    fn require_kappa(&self, case: &str) -> Result<f64> {
        self.kappa
            .ok_or_else(|| Error::precondition(format!("{case} under Condition 2 needs kappa")))
    }
}

/// Limit-model prediction, dispatching on the marginal shapes.
///
/// Equal shapes are detected by exact equality; the caller decides whether
/// two estimated shapes count as equal.
pub fn predict_theorem(margins: &MarginPair, dep: &LtDescriptor) -> Result<TailForm> {
    let (s1, x1) = (margins.m1.sigma(), margins.m1.xi());
    let (s2, x2) = (margins.m2.sigma(), margins.m2.xi());

    if x1 == x2 {
        let xi = x1;
        if xi < 0.0 {
            let eta = dep.require_eta("equal negative shapes")?;
            return Ok(TailForm::bounded(eta * xi, -(s1 + s2) / xi));
        }
        if xi > 0.0 {
            dep.require_eta("equal positive shapes")?;
            return match dep.condition {
                Condition::Cond2 => {
                    dep.require_kappa("equal positive shapes")?;
                    Ok(TailForm::heavy(xi))
                }
                Condition::Cond3a | Condition::Cond3b if dep.eta == Some(1.0) => Ok(TailForm::heavy(xi)),
                Condition::Cond3a | Condition::Cond3b => Err(Error::precondition(
                    "equal positive shapes under Condition 3 require eta = 1",
                )),
                Condition::Cond1 => Err(Error::precondition(
                    "Condition 1 only applies to exponential margins (xi1 = xi2 = 0)",
                )),
            };
        }
        let eta = dep.require_eta("zero shapes")?;
        return match dep.condition {
            Condition::Cond1 if s1 != s2 => Ok(TailForm::exponential(
                2.0 * eta * s1.max(s2),
                PrefactorClass::Constant,
            )),
            Condition::Cond1 => Ok(TailForm::exponential(2.0 * eta * s1, PrefactorClass::LinearInR)),
            Condition::Cond3a if eta == 1.0 => {
                Ok(TailForm::exponential(s1 + s2, PrefactorClass::Constant))
            }
            Condition::Cond3a => Err(Error::precondition(
                "zero shapes under Condition 3a require eta = 1",
            )),
            c => Err(Error::precondition(format!(
                "zero shapes are covered by Condition 1 or Condition 3a, not {c:?}"
            ))),
        };
    }

    let (xmax, xmin) = (x1.max(x2), x1.min(x2));
    if xmax < 0.0 {
        let r_f = -(s1 / x1 + s2 / x2);
        let eta = dep.require_eta("unequal negative shapes")?;
        return match dep.condition {
            Condition::Cond2 => {
                let kappa = dep.require_kappa("unequal negative shapes")?;
                let inv = (1.0 / xmax) * (0.5 / eta + kappa) + (1.0 / xmin) * (0.5 / eta - kappa);
                Ok(TailForm::bounded(1.0 / inv, r_f))
            }
            Condition::Cond3b => Ok(TailForm::bounded(eta * xmax, r_f)),
            c => Err(Error::precondition(format!(
                "unequal negative shapes are covered by Condition 2 or Condition 3b, not {c:?}"
            ))),
        };
    }

    Ok(predict_mixed_signs(margins))
}

/// Unequal shapes with `max(ξ₁, ξ₂) ≥ 0`; holds for any dependence.
fn predict_mixed_signs(margins: &MarginPair) -> TailForm {
    let (hi, lo) = if margins.m1.xi() > margins.m2.xi() {
        (margins.m1, margins.m2)
    } else {
        (margins.m2, margins.m1)
    };
    if hi.xi() > 0.0 {
        return TailForm::heavy(hi.xi());
    }
    // hi.xi() == 0 and lo.xi() < 0: perfect positive dependence gives the
    // largest constant, exp(-σ_neg / (σ_zero ξ_neg)).
    let c1 = (-lo.sigma() / (hi.sigma() * lo.xi())).exp();
    TailForm::exponential_interval(hi.sigma(), c1)
}

/// Descriptor used when a copula family is fed to [`predict_theorem`].
///
/// Extreme-value families (including the comonotone limit) satisfy
/// Condition 3 with `η = 1` (`H = V`, `κ = 1/2`); asymptotically independent
/// families are described by Condition 2 with `κ = 0`.
pub fn descriptor_for(spec: &CopulaSpec) -> Result<LtDescriptor> {
    let eta = spec.theoretical_dependence().eta;
    match spec {
        CopulaSpec::Logistic { .. } | CopulaSpec::PerfectPositive => {
            LtDescriptor::new(Some(1.0), None, Condition::Cond3a)
        }
        CopulaSpec::PerfectNegative => LtDescriptor::new(None, None, Condition::Cond2),
        _ => LtDescriptor::new(eta, Some(0.0), Condition::Cond2),
    }
}

/// Descriptor matching the Theorem-2 column for a family, where one applies:
/// `Cond1` for independence and `Cond3a` with `η = 1` for extreme-value
/// families. Other families have no theorem counterpart in that column.
pub fn zero_shape_descriptor(spec: &CopulaSpec) -> Option<LtDescriptor> {
    match spec {
        CopulaSpec::Independence => LtDescriptor::new(Some(0.5), None, Condition::Cond1).ok(),
        CopulaSpec::Logistic { .. } | CopulaSpec::PerfectPositive => {
            LtDescriptor::new(Some(1.0), None, Condition::Cond3a).ok()
        }
        _ => None,
    }
}

/// Gaussian-copula exponent rate along the ray `x₁ = w r`:
/// `h(w) = w/σ₁ − 2ρ √(w(1−w)/(σ₁σ₂)) + (1−w)/σ₂`.
pub fn gaussian_h(sigma1: f64, sigma2: f64, rho: f64, w: f64) -> f64 {
    w / sigma1 - 2.0 * rho * (w * (1.0 - w) / (sigma1 * sigma2)).sqrt() + (1.0 - w) / sigma2
}

/// Copula-specific prediction. Exponential margins and unequal negative
/// shapes use the family's own formula; every other shape pattern agrees
/// with the limit-model route and is delegated to [`predict_theorem`].
pub fn predict_copula(margins: &MarginPair, spec: &CopulaSpec) -> Result<TailForm> {
    let spec = spec.validated()?;
    let (s1, x1) = (margins.m1.sigma(), margins.m1.xi());
    let (s2, x2) = (margins.m2.sigma(), margins.m2.xi());

    if x1 == 0.0 && x2 == 0.0 {
        let sigma_r = copula_exponential_scale(&spec, s1, s2)?;
        let nontrivial_ai = match spec {
            CopulaSpec::InvertedLogistic { gamma } => gamma < 1.0,
            CopulaSpec::Gaussian { rho } => rho > 0.0,
            _ => false,
        };
        let class = match spec {
            CopulaSpec::PerfectPositive | CopulaSpec::Logistic { .. } => PrefactorClass::Constant,
            _ if nontrivial_ai || s1 == s2 => PrefactorClass::LinearInR,
            _ => PrefactorClass::Constant,
        };
        return Ok(TailForm::exponential(sigma_r, class));
    }

    if x1 != x2 && x1.max(x2) < 0.0 {
        let r_f = -(s1 / x1 + s2 / x2);
        return Ok(TailForm::bounded(copula_bounded_shape(&spec, x1, x2)?, r_f));
    }

    predict_theorem(margins, &descriptor_for(&spec)?)
}

/// `σ_R` for exponential margins (`ξ₁ = ξ₂ = 0`) under a copula family.
pub fn copula_exponential_scale(spec: &CopulaSpec, s1: f64, s2: f64) -> Result<f64> {
    match *spec {
        CopulaSpec::Independence => Ok(s1.max(s2)),
        CopulaSpec::PerfectPositive | CopulaSpec::Logistic { .. } => Ok(s1 + s2),
        CopulaSpec::InvertedLogistic { gamma } => {
            let (_, best) = maximize_unit_interval(|w| {
                v_function_logistic(gamma, s1 / w, s2 / (1.0 - w)).map_or(f64::NAN, |v| 1.0 / v)
            })?;
            Ok(best)
        }
        CopulaSpec::Gaussian { rho } => {
            let (_, best) = maximize_unit_interval(|w| 1.0 / gaussian_h(s1, s2, rho, w))?;
            Ok((1.0 - rho * rho) * best)
        }
        CopulaSpec::PerfectNegative => Err(Error::precondition(
            "zero shapes need eta, which perfect negative dependence does not have",
        )),
    }
}

/// `ξ_R` for negative shapes under a copula family. For unequal shapes this
/// is the family-specific formula; it is also well defined at equal shapes.
pub fn copula_bounded_shape(spec: &CopulaSpec, x1: f64, x2: f64) -> Result<f64> {
    if !(x1 < 0.0 && x2 < 0.0) {
        return Err(Error::precondition(format!(
            "bounded-shape formula needs negative shapes, got ({x1}, {x2})"
        )));
    }
    match *spec {
        CopulaSpec::Independence => Ok(1.0 / (1.0 / x1 + 1.0 / x2)),
        CopulaSpec::PerfectPositive | CopulaSpec::Logistic { .. } => Ok(x1.max(x2)),
        CopulaSpec::InvertedLogistic { gamma } => Ok(-1.0 / v_function_logistic(gamma, -x1, -x2)?),
        CopulaSpec::Gaussian { rho } => {
            Ok((1.0 - rho * rho) / (1.0 / x1 + 2.0 * rho / (x1 * x2).sqrt() + 1.0 / x2))
        }
        CopulaSpec::PerfectNegative => Err(Error::precondition(
            "negative shapes need eta, which perfect negative dependence does not have",
        )),
    }
}

/// GPD parameters for `(R − u_R) | R > u_R` if the tail form held exactly
/// above `u_R`.
pub fn gpd_equivalent(form: &TailForm, u_r: f64) -> Result<GpdParams> {
    if !(u_r >= 0.0) {
        return Err(Error::Domain(format!("threshold {u_r} must be non-negative")));
    }
    if u_r >= form.r_f {
        return Err(Error::Domain(format!("threshold {u_r} is not below r_F = {}", form.r_f)));
    }
    match form.regime {
        Regime::Heavy => {
            let xi = form.xi_r.ok_or_else(|| Error::invalid("heavy tail form without xi_R"))?;
            if u_r == 0.0 {
                return Err(Error::Domain("heavy-tail equivalent needs u_R > 0 (scale u_R xi_R)".into()));
            }
            GpdParams::new(u_r * xi, xi)
        }
        Regime::Exponential => {
            let s = form.sigma_r.ok_or_else(|| Error::invalid("exponential tail form without sigma_R"))?;
            GpdParams::new(s, 0.0)
        }
        Regime::Bounded => {
            let xi = form.xi_r.ok_or_else(|| Error::invalid("bounded tail form without xi_R"))?;
            GpdParams::new(-xi * (form.r_f - u_r), xi)
        }
    }
}
