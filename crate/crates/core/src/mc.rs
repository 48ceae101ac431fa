//! Monte Carlo experiments over `(n, α)` grids.
//!
//! Replicate `r` of cell `j` uses seed `derive_seed(master, j·R + r)`, cells
//! numbered α-major then `n`, so appending cells never changes the draws of
//! existing ones. Replicates run in parallel; aggregation folds in replicate
//! order, so results are bit-identical for any thread count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::est::{self, KahanSum};
use crate::model::{self, DiffusionModel};
use crate::par::{self, Execution};
use crate::sim::{self, Method, NormalStream, ObservationScheme, SimError, Stepper, BLOWUP_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Free-form label written to the `case` column.
    pub label: String,
    pub model: DiffusionModel,
    pub alphas: Vec<f64>,
    pub ns: Vec<u64>,
    pub replicates: u32,
    pub method: Method,
    pub master_seed: u64,
    pub substeps: u32,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), McError> {
        let invalid = |msg: String| Err(McError::InvalidConfig(msg));
        if self.replicates < 2 {
            return invalid(format!("replicates must be at least 2, got {}", self.replicates));
        }
        if self.alphas.is_empty() || self.ns.is_empty() {
            return invalid("alphas and ns must be non-empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return invalid(format!("every alpha must lie in (0, 1), got {a}"));
        }
        if self.ns.contains(&0) {
            return invalid("every n must be positive".into());
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("ns must be strictly ascending".into());
        }
        if self.substeps == 0 {
            return invalid("substeps must be positive".into());
        }
        Ok(())
    }

    /// `(n, α)` cells in seed order.
    pub fn cells(&self) -> Vec<(u64, f64)> {
        self.alphas
            .iter()
            .flat_map(|&alpha| self.ns.iter().map(move |&n| (n, alpha)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error("all {replicates} replicates failed in cell n = {n}, alpha = {alpha}: {first_error}")]
    AllReplicatesFailed {
        n: u64,
        alpha: f64,
        replicates: u32,
        first_error: String,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("observable is not finite at x = {x}")]
    NonFiniteObservable { x: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub case: String,
    pub n: u64,
    pub alpha: f64,
    pub replicate: u32,
    pub seed: u64,
    pub theta_hat: Option<f64>,
    #[serde(rename = "Dn")]
    pub dn: Option<f64>,
    pub std_err: Option<f64>,
    /// `ok`, or the failure message.
    pub status: String,
}

impl ReplicateRecord {
    pub fn succeeded(&self) -> bool {
        self.theta_hat.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: u64,
    pub alpha: f64,
    pub replicates: u32,
    pub successes: u32,
    pub failures: u32,
    pub mean_theta_hat: f64,
    /// Sample standard deviation, divisor `R - 1`.
    pub std_theta_hat: f64,
    pub mean_dn: f64,
    /// KS distance of the standardized errors from N(0, 1); absent when the
    /// invariant law could not be computed.
    pub ks_statistic: Option<f64>,
    pub ks_pass_5pct: Option<bool>,
    /// `n^{-α/2} / √E d(ξ)`.
    pub predicted_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    /// `E d(ξ)` by quadrature, when the invariant law exists.
    pub info: Option<f64>,
    pub cells: Vec<CellSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

/// Runs every cell in parallel (see [`run_experiment_with`]).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, McError> {
    run_experiment_with(config, Execution::Parallel)
}

pub fn run_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<ExperimentOutcome, McError> {
    let info = model::invariant_law(&config.model).ok().map(|law| law.info);
    run_experiment_with_info(config, info, execution)
}

/// Like [`run_experiment_with`] with a caller-supplied `E d(ξ)` (e.g. a
/// closed form), skipping the quadrature.
pub fn run_experiment_with_info(
    config: &ExperimentConfig,
    info: Option<f64>,
    execution: Execution,
) -> Result<ExperimentOutcome, McError> {
    config.validate()?;
    let cells = config.cells();
    let schemes = cells
        .iter()
        .map(|&(n, alpha)| ObservationScheme::new(n, alpha, config.substeps))
        .collect::<Result<Vec<_>, _>>()?;
    let per_cell = config.replicates as usize;
    let replicates = par::map_indexed(cells.len() * per_cell, execution, |global| {
        let scheme = &schemes[global / per_cell];
        let replicate = (global % per_cell) as u32;
        let seed = sim::derive_seed(config.master_seed, global as u64);
        let outcome = est::simulate_and_estimate(&config.model, scheme, config.method, seed);
        let (theta_hat, dn, std_err, status) = match outcome {
            Ok(r) => (
                Some(r.theta_hat),
                Some(r.denominator_dn),
                info.map(|i| est::standardized_error(&r, config.model.theta, i, scheme)),
                "ok".to_string(),
            ),
            Err(e) => (None, None, None, e.to_string()),
        };
        ReplicateRecord {
            case: config.label.clone(),
            n: scheme.n(),
            alpha: scheme.alpha(),
            replicate,
            seed,
            theta_hat,
            dn,
            std_err,
            status,
        }
    });
    let summaries = replicates
        .chunks(per_cell)
        .map(|chunk| summarize(chunk, info))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentOutcome {
        info,
        cells: summaries,
        replicates,
    })
}

fn summarize(records: &[ReplicateRecord], info: Option<f64>) -> Result<CellSummary, McError> {
    let first = &records[0];
    let (n, alpha) = (first.n, first.alpha);
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.succeeded()).collect();
    if ok.is_empty() {
        return Err(McError::AllReplicatesFailed {
            n,
            alpha,
            replicates: records.len() as u32,
            first_error: first.status.clone(),
        });
    }
    let thetas: Vec<f64> = ok.iter().filter_map(|r| r.theta_hat).collect();
    let (mean, std) = mean_and_std(&thetas);
    let mean_dn = mean_and_std(&ok.iter().filter_map(|r| r.dn).collect::<Vec<_>>()).0;
    let errors: Vec<f64> = ok.iter().filter_map(|r| r.std_err).collect();
    let ks = (info.is_some() && !errors.is_empty()).then(|| ks_statistic(&errors));
    Ok(CellSummary {
        n,
        alpha,
        replicates: records.len() as u32,
        successes: ok.len() as u32,
        failures: (records.len() - ok.len()) as u32,
        mean_theta_hat: mean,
        std_theta_hat: std,
        mean_dn,
        ks_statistic: ks,
        ks_pass_5pct: ks.map(|d| d < ks_critical_5pct(errors.len())),
        predicted_std: info.map(|i| model::predicted_std(i, n, alpha)),
    })
}

/// Mean and sample standard deviation (divisor `m - 1`; NaN for `m < 2`).
pub fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().copied().collect::<KahanSum>().value() / m;
    let ss = samples
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<KahanSum>()
        .value();
    let std = if samples.len() < 2 {
        f64::NAN
    } else {
        (ss / (m - 1.0)).sqrt()
    };
    (mean, std)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov–Smirnov distance from N(0, 1):
/// `max_i max(i/m - Φ(x₍ᵢ₎), Φ(x₍ᵢ₎) - (i-1)/m)`.
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = normal_cdf(x);
            ((i + 1) as f64 / m - cdf).max(cdf - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 5% critical value `1.36/√m`.
pub fn ks_critical_5pct(m: usize) -> f64 {
    1.36 / (m as f64).sqrt()
}

/// Largest number of steps [`ergodic_average`] will take.
pub const ERGODIC_STEP_BUDGET: u64 = 1_000_000_000;

/// Time average `(1/T) Σ h(X_{iΔ}) Δ` along one simulated path with step
/// `dt`, an estimate of `E h(ξ)` for ergodic models. Computed as the mean of
/// `h` at the `T/dt` left endpoints, so `h ≡ 1` gives exactly 1.
pub fn ergodic_average<H>(
    model: &DiffusionModel,
    mut h: H,
    horizon: f64,
    dt: f64,
    method: Method,
    seed: u64,
) -> Result<f64, McError>
where
    H: FnMut(f64) -> f64,
{
    let requested = (horizon / dt).round();
    if !(requested >= 1.0 && requested <= ERGODIC_STEP_BUDGET as f64) {
        return Err(SimError::BudgetExceeded {
            requested,
            limit: ERGODIC_STEP_BUDGET,
        }
        .into());
    }
    let steps = requested as u64;
    let dt = horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut stepper = Stepper::new(model, method);
    let mut normals = NormalStream::new(seed);
    let mut acc = KahanSum::new();
    let mut x = model.x0;
    for i in 0..steps {
        let v = h(x);
        if !v.is_finite() {
            return Err(McError::NonFiniteObservable { x });
        }
        acc.add(v);
        let (a, b) = stepper.coefficients(x).map_err(SimError::from)?;
        x = stepper
            .advance(x, a, b, dt, sqrt_dt, normals.next_normal())
            .map_err(SimError::from)?;
        if !(x.abs() <= BLOWUP_THRESHOLD) {
            return Err(SimError::NumericalBlowup {
                observation: i + 1,
                substep: 0,
                value: x,
            }
            .into());
        }
    }
    Ok(acc.value() / steps as f64)
}
