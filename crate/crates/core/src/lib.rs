//! Upper-tail behaviour of aggregates `R = ω₁X₁ + ω₂X₂` where each `Xᵢ` is
//! generalized-Pareto distributed and the pair is coupled by an extremal
//! dependence structure.
//!
//! The crate is organised bottom-up:
//!
//! - [`gpd`]: the marginal model (cdf, quantile, sampling, threshold stability).
//! - [`copulas`]: samplers and theoretical `(χ, χ̄, η)` for the supported families.
//! - [`dependence`]: rank-based empirical estimates of `χ` and `η`.
//! - [`tailpredict`]: closed-form first-order tail of `R`, both from the
//!   limit-model theorems and from the copula-specific formulas.
//! - [`fitting`]: GPD likelihood fits and the stationary bootstrap.
//! - [`montecarlo`]: simulation of `R` and transformed-quantile slope checks.
//! - [`pipeline`]: the gridded-data study (marginal, pooled, aggregate fits).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copulas;
pub mod dependence;
pub mod error;
pub mod fitting;
pub mod gpd;
pub mod montecarlo;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod tailpredict;

pub use copulas::{CopulaSpec, DependenceSummary};
pub use dependence::DependenceEstimate;
pub use error::{Error, Result};
pub use fitting::{BootstrapCI, GpdFit, PooledFit};
pub use gpd::GpdParams;
pub use montecarlo::{AggregateSample, QuantileCurve, Verdict, Weights};
pub use pipeline::{FitReport, GridDataset};
pub use tailpredict::{LtDescriptor, MarginPair, TailForm};
