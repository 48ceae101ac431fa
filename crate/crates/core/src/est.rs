//! Discretized maximum likelihood estimator of the drift parameter.
//!
//! ```text
//! θ̂ = Σ_{k=1}^{N} c(X_{(k-1)/n}) ΔX_k  /  (n⁻¹ Σ_{k=1}^{N} d(X_{(k-1)/n}))
//! ```
//!
//! Both sums run over `k = 1..N` with left endpoints, `N = ⌊n^{1+α}⌋`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{DomainError, Expr};
use crate::model::{score_terms, DiffusionModel};
use crate::sim::{self, Method, ObservationScheme, ObservedPath, SimError};

/// Kahan compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("denominator {value:e} is degenerate; the drift vanishes along the path")]
    DegenerateDenominator { value: f64 },
    #[error("diffusion coefficient vanishes at observed value x = {x}")]
    DegenerateDiffusion { x: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("path has {got} values, scheme needs {expected}")]
    PathLength { got: usize, expected: usize },
}

/// Denominators at or below this are treated as zero.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: f64,
    /// `Σ c(X_{(k-1)/n}) ΔX_k`.
    pub numerator: f64,
    /// `D_n = n^{-1-α} Σ d(X_{(k-1)/n})`.
    #[serde(rename = "Dn")]
    pub denominator_dn: f64,
    /// `n⁻¹ Σ d(X_{(k-1)/n})`, the estimator's denominator.
    pub denominator_raw: f64,
    #[serde(rename = "N_used")]
    pub n_used: u64,
}

/// Running sums for the estimator, fed one observation interval at a time.
#[derive(Debug, Clone, Default)]
pub struct EstimatorSums {
    numerator: KahanSum,
    d_sum: KahanSum,
    count: u64,
}

impl EstimatorSums {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the interval starting at `x_prev`, where `a_prev = a(x_prev)` and
    /// `b_prev = b(x_prev)`, and ending at `x_next`.
    #[inline]
    pub fn push(&mut self, x_prev: f64, a_prev: f64, b_prev: f64, x_next: f64) -> Result<(), EstimateError> {
        let (c, d) = score_terms(a_prev, b_prev).ok_or(EstimateError::DegenerateDiffusion { x: x_prev })?;
        self.numerator.add(c * (x_next - x_prev));
        self.d_sum.add(d);
        self.count += 1;
        Ok(())
    }

    pub fn finish(&self, scheme: &ObservationScheme) -> Result<EstimateResult, EstimateError> {
        let n = scheme.n() as f64;
        let d_sum = self.d_sum.value();
        let denominator_raw = d_sum / n;
        if !(denominator_raw > DEGENERATE_DENOMINATOR) {
            return Err(EstimateError::DegenerateDenominator { value: denominator_raw });
        }
        let numerator = self.numerator.value();
        Ok(EstimateResult {
            theta_hat: numerator / denominator_raw,
            numerator,
            denominator_dn: d_sum * n.powf(-1.0 - scheme.alpha()),
            denominator_raw,
            n_used: self.count,
        })
    }
}

/// Estimates θ from an observed path given the model coefficients.
pub fn estimate(path: &ObservedPath, a: &Expr, b: &Expr) -> Result<EstimateResult, EstimateError> {
    let expected = path.scheme.observations() as usize + 1;
    if path.values.len() != expected {
        return Err(EstimateError::PathLength {
            got: path.values.len(),
            expected,
        });
    }
    let mut sums = EstimatorSums::new();
    for w in path.values.windows(2) {
        let (x_prev, x_next) = (w[0], w[1]);
        sums.push(x_prev, a.evaluate(x_prev)?, b.evaluate(x_prev)?, x_next)?;
    }
    sums.finish(&path.scheme)
}

/// Simulates one path and estimates θ from it without storing the path.
///
/// Bit-identical to `estimate(&simulate_path(..)?, &model.a, &model.b)`.
pub fn simulate_and_estimate(
    model: &DiffusionModel,
    scheme: &ObservationScheme,
    method: Method,
    seed: u64,
) -> Result<EstimateResult, SimulateEstimateError> {
    let mut sums = EstimatorSums::new();
    let mut failure = None;
    sim::drive(model, scheme, method, seed, |obs| {
        if let Err(e) = sums.push(obs.x_prev, obs.a_prev, obs.b_prev, obs.x_next) {
            failure = Some(e);
            return false;
        }
        true
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(sums.finish(scheme)?)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateEstimateError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// `n^{α/2} (θ̂ - θ) √info`, asymptotically standard normal.
pub fn standardized_error(result: &EstimateResult, theta_true: f64, info: f64, scheme: &ObservationScheme) -> f64 {
    (scheme.n() as f64).powf(scheme.alpha() / 2.0) * (result.theta_hat - theta_true) * info.sqrt()
}
