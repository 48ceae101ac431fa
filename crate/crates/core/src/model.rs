//! The diffusion `dX = θ a(X) dt + b(X) dW` and the analytic objects built
//! from its coefficients.
//!
//! With `c = a/b²` and `d = a²/b²`, the scale density is
//! `φ(x) = exp(-2θ ∫₀ˣ c)`, the scale function `Φ(x) = ∫₀ˣ φ`, and the
//! invariant density `μ(x) = 1 / (G b(x)² φ(x))` with normalizer
//! `G = ∫ 1/(b²φ)`. The asymptotic variance of the drift estimator is
//! `1 / E d(ξ)` for `ξ ~ μ`.
//!
//! Assumption checks are numeric heuristics over a finite probe grid. They
//! report pass/fail/inconclusive with a witness string; they do not prove
//! anything.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::{self, DomainError, Expr, ParseError};
use crate::quad::{self, QuadConfig, QuadError, QuadResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid coefficient expression: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("diffusion coefficient vanishes at x = {x}")]
    DegenerateDiffusion { x: f64 },
    #[error("{field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("quadrature failed: {0}")]
    Quad(#[from] QuadError),
    #[error("information E d(ξ) = {info} is not positive; is the drift identically zero?")]
    NonPositiveInfo { info: f64 },
}

/// `dX = θ a(X) dt + b(X) dW`, `X₀ = x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub a: Expr,
    pub b: Expr,
    pub theta: f64,
    pub x0: f64,
}

impl DiffusionModel {
    pub fn new(a: Expr, b: Expr, theta: f64, x0: f64) -> Result<Self, ModelError> {
        for (field, value) in [("theta", theta), ("x0", x0)] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { field, value });
            }
        }
        Ok(Self { a, b, theta, x0 })
    }

    /// Builds a model from coefficient source text.
    pub fn parse(a: &str, b: &str, theta: f64, x0: f64) -> Result<Self, ModelError> {
        Self::new(expr::parse(a)?, expr::parse(b)?, theta, x0)
    }

    /// Short stable hash of `(a, b, θ, x0)` used to tag path files.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.a.to_string().as_bytes());
        hasher.update([0]);
        hasher.update(self.b.to_string().as_bytes());
        hasher.update([0]);
        hasher.update(self.theta.to_bits().to_le_bytes());
        hasher.update(self.x0.to_bits().to_le_bytes());
        hasher.finalize()[..8]
            .iter()
            .map(|byte| format!("{byte:02x}"))
            .collect()
    }

    pub fn drift(&self, x: f64) -> Result<f64, ModelError> {
        Ok(self.a.evaluate(x)?)
    }

    pub fn diffusion(&self, x: f64) -> Result<f64, ModelError> {
        Ok(self.b.evaluate(x)?)
    }

    /// `c(x) = a(x)/b(x)²`.
    pub fn c(&self, x: f64) -> Result<f64, ModelError> {
        Ok(self.c_and_d(x)?.0)
    }

    /// `d(x) = a(x)·c(x) = a(x)²/b(x)²`.
    pub fn d(&self, x: f64) -> Result<f64, ModelError> {
        Ok(self.c_and_d(x)?.1)
    }

    pub fn c_and_d(&self, x: f64) -> Result<(f64, f64), ModelError> {
        let a = self.a.evaluate(x)?;
        let b = self.b.evaluate(x)?;
        score_terms(a, b).ok_or(ModelError::DegenerateDiffusion { x })
    }
}

impl fmt::Display for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dX = {} * {} dt + {} dW, X0 = {}",
            self.theta, self.a, self.b, self.x0
        )
    }
}

/// `(c, d) = (a/b², a·c)`, or `None` when `b²` is zero or the ratio is not
/// finite. Shared by the estimator so both evaluate bit-identically.
#[inline]
pub fn score_terms(a: f64, b: f64) -> Option<(f64, f64)> {
    let c = a / (b * b);
    let d = a * c;
    (c.is_finite() && d.is_finite()).then_some((c, d))
}

/// Number of cells in the cached grid for `∫₀ˣ c`.
pub const SCALE_CACHE_CELLS: usize = 1 << 14;
/// Half-width of the cached window for `∫₀ˣ c`.
pub const SCALE_CACHE_HALF_WIDTH: f64 = 64.0;

/// `∫₀ˣ c(y) dy` tabulated on a uniform grid and interpolated by cubic
/// Hermite polynomials using the exact slopes `c(xᵢ)`. Outside the window, or
/// past a node where `c` could not be evaluated, it falls back to direct
/// quadrature from the nearest good node.
#[derive(Debug, Clone)]
struct ScaleCache {
    half_width: f64,
    step: f64,
    integral: Vec<f64>,
    slope: Vec<f64>,
    // Valid node index range [lo, hi].
    lo: usize,
    hi: usize,
}

const CELL_QUAD: QuadConfig = QuadConfig {
    rel_tol: 1e-13,
    abs_tol: 1e-15,
    max_evaluations: 10_000,
};

impl ScaleCache {
    fn build(model: &DiffusionModel) -> Self {
        let cells = SCALE_CACHE_CELLS;
        let half_width = SCALE_CACHE_HALF_WIDTH;
        let step = 2.0 * half_width / cells as f64;
        let node = |i: usize| -half_width + i as f64 * step;
        let mid = cells / 2;
        let mut integral = vec![f64::NAN; cells + 1];
        let mut slope = vec![f64::NAN; cells + 1];
        integral[mid] = 0.0;
        let (mut lo, mut hi) = (mid, mid);
        if let Ok(c0) = model.c(0.0) {
            slope[mid] = c0;
            // outward from the origin; stop each side at the first failure
            for i in mid + 1..=cells {
                let (Ok(s), Some(piece)) = (model.c(node(i)), cell_integral(model, node(i - 1), node(i))) else {
                    break;
                };
                integral[i] = integral[i - 1] + piece;
                slope[i] = s;
                hi = i;
            }
            for i in (0..mid).rev() {
                let (Ok(s), Some(piece)) = (model.c(node(i)), cell_integral(model, node(i), node(i + 1))) else {
                    break;
                };
                integral[i] = integral[i + 1] - piece;
                slope[i] = s;
                lo = i;
            }
        }
        Self {
            half_width,
            step,
            integral,
            slope,
            lo,
            hi,
        }
    }

    fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step
    }

    fn eval(&self, model: &DiffusionModel, x: f64) -> Result<f64, ModelError> {
        let pos = (x + self.half_width) / self.step;
        if pos >= self.lo as f64 && pos <= self.hi as f64 && self.lo < self.hi {
            let i = (pos.floor() as usize).min(self.hi - 1);
            let t = pos - i as f64;
            if t == 0.0 {
                return Ok(self.integral[i]);
            }
            let (t2, t3) = (t * t, t * t * t);
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + t;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            return Ok(h00 * self.integral[i]
                + h10 * self.step * self.slope[i]
                + h01 * self.integral[i + 1]
                + h11 * self.step * self.slope[i + 1]);
        }
        let anchor = if x > 0.0 { self.hi } else { self.lo };
        let x_anchor = self.node(anchor);
        let base = self.integral[anchor];
        let (from, to, sign) = if x >= x_anchor {
            (x_anchor, x, 1.0)
        } else {
            (x, x_anchor, -1.0)
        };
        let piece = integrate_checked(|y| model.c(y), from, to, &QuadConfig::default())?;
        Ok(base + sign * piece.value)
    }
}

fn cell_integral(model: &DiffusionModel, a: f64, b: f64) -> Option<f64> {
    let r = quad::integrate_with(|y| model.c(y).unwrap_or(f64::NAN), a, b, &CELL_QUAD).ok()?;
    r.converged.then_some(r.value)
}

/// Runs quadrature over a fallible integrand. When the integrand fails at a
/// node the underlying model error is reported instead of a bare
/// non-finite-value error.
fn integrate_checked<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult, ModelError>
where
    F: Fn(f64) -> Result<f64, ModelError>,
{
    let result = quad::integrate_with(|y| f(y).unwrap_or(f64::NAN), a, b, cfg);
    explain(result, &f)?.require_converged().map_err(Into::into)
}

fn integrate_line_checked<F>(f: F, cfg: &QuadConfig) -> Result<QuadResult, ModelError>
where
    F: Fn(f64) -> Result<f64, ModelError>,
{
    let result = quad::integrate_real_line_with(|y| f(y).unwrap_or(f64::NAN), cfg);
    explain(result, &f)
}

fn explain<F>(result: Result<QuadResult, QuadError>, f: &F) -> Result<QuadResult, ModelError>
where
    F: Fn(f64) -> Result<f64, ModelError>,
{
    match result {
        Err(QuadError::NonFiniteValue { x }) => match f(x) {
            Err(e) => Err(e),
            Ok(_) => Err(QuadError::NonFiniteValue { x }.into()),
        },
        other => Ok(other?),
    }
}

/// `c`, `d`, `φ`, `Φ` for a fixed model.
#[derive(Debug, Clone)]
pub struct DerivedFunctions {
    model: DiffusionModel,
    cache: ScaleCache,
}

/// Builds the derived functions, tabulating `∫₀ˣ c` once.
pub fn derive(model: &DiffusionModel) -> DerivedFunctions {
    DerivedFunctions {
        model: model.clone(),
        cache: ScaleCache::build(model),
    }
}

impl DerivedFunctions {
    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn c(&self, x: f64) -> Result<f64, ModelError> {
        self.model.c(x)
    }

    pub fn d(&self, x: f64) -> Result<f64, ModelError> {
        self.model.d(x)
    }

    /// `∫₀ˣ c(y) dy`.
    pub fn integral_c(&self, x: f64) -> Result<f64, ModelError> {
        self.cache.eval(&self.model, x)
    }

    /// `ln φ(x) = -2θ ∫₀ˣ c`.
    pub fn log_phi(&self, x: f64) -> Result<f64, ModelError> {
        Ok(-2.0 * self.model.theta * self.integral_c(x)?)
    }

    /// `φ(x)`; may overflow to `+∞` far out for strongly ergodic models.
    pub fn phi(&self, x: f64) -> Result<f64, ModelError> {
        Ok(self.log_phi(x)?.exp())
    }

    /// `Φ(x) = ∫₀ˣ φ`. Returns `±∞` when `φ` overflows on the way to `x`.
    pub fn big_phi(&self, x: f64) -> Result<f64, ModelError> {
        let (from, to, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let phi = |y: f64| self.phi(y);
        match integrate_checked(phi, from, to, &QuadConfig::default()) {
            Ok(r) => Ok(sign * r.value),
            Err(ModelError::Quad(QuadError::NonFiniteValue { .. })) => Ok(sign * f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// `1 / (b(x)² φ(x))`, the unnormalized invariant density.
    pub fn speed_density(&self, x: f64) -> Result<f64, ModelError> {
        let b = self.model.diffusion(x)?;
        let b2 = b * b;
        if b2 == 0.0 {
            return Err(ModelError::DegenerateDiffusion { x });
        }
        Ok((-self.log_phi(x)?).exp() / b2)
    }
}

/// Stationary law of an ergodic model.
#[derive(Debug, Clone)]
pub struct InvariantLaw {
    derived: DerivedFunctions,
    /// `G = ∫ 1/(b²φ)`.
    pub g: f64,
    /// `E d(ξ)`, the reciprocal asymptotic variance of `n^{α/2}(θ̂ - θ)`.
    pub info: f64,
    quad: QuadConfig,
}

/// Computes `G`, the invariant density and `E d(ξ)` by quadrature over ℝ.
pub fn invariant_law(model: &DiffusionModel) -> Result<InvariantLaw, ModelError> {
    invariant_law_from(derive(model))
}

pub fn invariant_law_from(derived: DerivedFunctions) -> Result<InvariantLaw, ModelError> {
    let quad = QuadConfig::default();
    let g = integrate_line_checked(|x| derived.speed_density(x), &quad)?
        .require_converged()?
        .value;
    let mut law = InvariantLaw {
        derived,
        g,
        info: f64::NAN,
        quad,
    };
    let info = law.expectation(|law, x| law.derived.d(x))?;
    if !(info > 1e-12) {
        return Err(ModelError::NonPositiveInfo { info });
    }
    law.info = info;
    Ok(law)
}

impl InvariantLaw {
    pub fn derived(&self) -> &DerivedFunctions {
        &self.derived
    }

    /// `μ(x) = 1/(G b(x)² φ(x))`.
    pub fn density(&self, x: f64) -> Result<f64, ModelError> {
        Ok(self.derived.speed_density(x)? / self.g)
    }

    /// `E h(ξ) = ∫ h μ`.
    pub fn expectation<H>(&self, h: H) -> Result<f64, ModelError>
    where
        H: Fn(&Self, f64) -> Result<f64, ModelError>,
    {
        let integrand = |x: f64| {
            let density = self.density(x)?;
            if density == 0.0 {
                return Ok(0.0);
            }
            Ok(h(self, x)? * density)
        };
        Ok(integrate_line_checked(integrand, &self.quad)?
            .require_converged()?
            .value)
    }

    /// `∫ μ`, which is 1 up to quadrature error.
    pub fn total_mass(&self) -> Result<f64, ModelError> {
        self.expectation(|_, _| Ok(1.0))
    }

    /// `E|ξ|^r`.
    pub fn moment(&self, r: u32) -> Result<f64, ModelError> {
        self.expectation(|_, x| Ok(x.abs().powi(r as i32)))
    }

    /// Even absolute moments `r = 2, 4, …, r_max`.
    pub fn moments(&self, r_max: u32) -> Result<BTreeMap<u32, f64>, ModelError> {
        (2..=r_max).step_by(2).map(|r| Ok((r, self.moment(r)?))).collect()
    }

    /// `n^{-α/2} / √E d(ξ)`, the predicted standard deviation of `θ̂`.
    pub fn predicted_std(&self, n: u64, alpha: f64) -> f64 {
        predicted_std(self.info, n, alpha)
    }
}

pub fn predicted_std(info: f64, n: u64, alpha: f64) -> f64 {
    (n as f64).powf(-alpha / 2.0) / info.sqrt()
}

/// Grid `[-radius, radius]` with `points` equally spaced nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub radius: f64,
    pub points: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            radius: 50.0,
            points: 10_000,
        }
    }
}

impl ProbeSpec {
    fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let step = 2.0 * self.radius / (self.points - 1) as f64;
        (0..self.points).map(move |i| -self.radius + i as f64 * step)
    }

    fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            ..*self
        }
    }

    fn widened(&self) -> Self {
        Self {
            radius: 2.0 * self.radius,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssumptionId {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    C7,
}

impl AssumptionId {
    pub const ALL: [AssumptionId; 7] = [
        AssumptionId::A1,
        AssumptionId::A2,
        AssumptionId::A3,
        AssumptionId::A4,
        AssumptionId::A5,
        AssumptionId::A6,
        AssumptionId::C7,
    ];

    pub fn description(self) -> &'static str {
        match self {
            AssumptionId::A1 => "a, b globally Lipschitz",
            AssumptionId::A2 => "scale function diverges at both ends",
            AssumptionId::A3 => "speed measure finite (G < inf)",
            AssumptionId::A4 => "1/|b| grows at most polynomially",
            AssumptionId::A5 => "invariant law has finite moments",
            AssumptionId::A6 => "drift a not identically zero",
            AssumptionId::C7 => "limsup c(x) sgn(x) < 0 as |x| -> inf",
        }
    }
}

impl fmt::Display for AssumptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub id: AssumptionId,
    pub status: CheckStatus,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub probe: ProbeSpec,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn status(&self, id: AssumptionId) -> CheckStatus {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.status)
            .expect("report holds every assumption")
    }

    /// Failed checks among A1–A6. C7 is a sufficient condition only and
    /// never gates anything.
    pub fn blocking_failures(&self) -> Vec<AssumptionId> {
        self.entries
            .iter()
            .filter(|e| e.id != AssumptionId::C7 && e.status == CheckStatus::Fail)
            .map(|e| e.id)
            .collect()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let status = match e.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Inconclusive => "inconclusive",
            };
            writeln!(f, "{:<3} {:<13} {:<40} {}", e.id, status, e.id.description(), e.witness)?;
        }
        Ok(())
    }
}

/// Moment orders checked for A5.
pub const MOMENT_ORDERS_CHECKED: u32 = 16;
/// Threshold below which the drift is considered identically zero.
pub const ZERO_DRIFT_THRESHOLD: f64 = 1e-12;
/// Growth factor of `Φ` over the probe radii that counts as divergence.
pub const SCALE_GROWTH_THRESHOLD: f64 = 1e3;

/// Probes A1–A6 and C7 numerically. Never fails; problems are reported
/// in the entries.
pub fn check_assumptions(model: &DiffusionModel, probe: ProbeSpec) -> AssumptionReport {
    let derived = derive(model);
    let (a3_status, a3_witness, law) = check_a3(&derived);
    let entries = vec![
        entry(AssumptionId::A1, check_a1(model, probe)),
        entry(AssumptionId::A2, check_a2(&derived, probe)),
        entry(AssumptionId::A3, (a3_status, a3_witness)),
        entry(AssumptionId::A4, check_a4(model, probe)),
        entry(AssumptionId::A5, check_a5(law.as_ref())),
        entry(AssumptionId::A6, check_a6(model, probe)),
        entry(AssumptionId::C7, check_c7(model, probe)),
    ];
    AssumptionReport { probe, entries }
}

fn entry(id: AssumptionId, (status, witness): (CheckStatus, String)) -> AssumptionEntry {
    AssumptionEntry { id, status, witness }
}

fn lipschitz_estimate(model: &DiffusionModel, probe: ProbeSpec) -> Result<f64, ModelError> {
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut worst = 0.0_f64;
    for x in probe.grid() {
        let (a, b) = (model.drift(x)?, model.diffusion(x)?);
        if let Some((px, pa, pb)) = prev {
            worst = worst.max(((a - pa).abs() + (b - pb).abs()) / (x - px));
        }
        prev = Some((x, a, b));
    }
    Ok(worst)
}

fn check_a1(model: &DiffusionModel, probe: ProbeSpec) -> (CheckStatus, String) {
    let estimates = [probe, probe.refined(), probe.widened()].map(|p| lipschitz_estimate(model, p));
    let [Ok(base), Ok(fine), Ok(wide)] = estimates else {
        let err = estimates.into_iter().find_map(Result::err).unwrap();
        return (CheckStatus::Fail, format!("coefficients not defined on probe: {err}"));
    };
    let witness = format!("L ~ {base:.4} (refined {fine:.4}, radius x2 {wide:.4})");
    // stable under refinement (no kinks steeper than the grid) and under
    // widening (no superlinear growth)
    let stable = |v: f64| v.is_finite() && v <= 1.5 * base.max(f64::MIN_POSITIVE);
    if base.is_finite() && stable(fine) && stable(wide) {
        (CheckStatus::Pass, witness)
    } else {
        (CheckStatus::Fail, witness)
    }
}

fn check_a2(derived: &DerivedFunctions, probe: ProbeSpec) -> (CheckStatus, String) {
    let radii: Vec<f64> = (0..5).map(|k| probe.radius / 8.0 * 2f64.powi(k)).collect();
    let mut notes = Vec::new();
    let mut all_pass = true;
    for (sign, label) in [(1.0, "+"), (-1.0, "-")] {
        let values: Result<Vec<f64>, ModelError> = radii.iter().map(|r| Ok(derived.big_phi(sign * r)?.abs())).collect();
        let values = match values {
            Ok(v) => v,
            Err(e) => return (CheckStatus::Inconclusive, format!("Phi({label}R): {e}")),
        };
        let last = *values.last().unwrap();
        let diverging = if last.is_infinite() {
            true
        } else {
            let grew = last > SCALE_GROWTH_THRESHOLD * values[0];
            let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
            let non_shrinking = increments.windows(2).all(|w| w[1] >= w[0] && w[1] > 0.0);
            grew || non_shrinking
        };
        all_pass &= diverging;
        notes.push(format!("|Phi({label}{})| = {last:.4e}", radii[4]));
    }
    let status = if all_pass { CheckStatus::Pass } else { CheckStatus::Fail };
    (status, notes.join(", "))
}

fn check_a3(derived: &DerivedFunctions) -> (CheckStatus, String, Option<InvariantLaw>) {
    match invariant_law_from(derived.clone()) {
        Ok(law) => (CheckStatus::Pass, format!("G = {:.10}", law.g), Some(law)),
        // Let A3 speak for G alone; information problems belong to A6.
        Err(ModelError::NonPositiveInfo { .. }) => {
            match integrate_line_checked(|x| derived.speed_density(x), &QuadConfig::default()) {
                Ok(r) if r.converged => (CheckStatus::Pass, format!("G = {:.10}", r.value), None),
                Ok(r) => (CheckStatus::Fail, format!("G diverges (partial {:.4e})", r.value), None),
                Err(e) => (CheckStatus::Fail, e.to_string(), None),
            }
        }
        Err(ModelError::Quad(QuadError::BudgetExceeded { best })) => (
            CheckStatus::Inconclusive,
            format!("quadrature budget exhausted at {:.4e}", best.value),
            None,
        ),
        Err(ModelError::Quad(QuadError::SuspectedDivergent { best })) => (
            CheckStatus::Fail,
            format!("G suspected divergent (partial {:.4e})", best.value),
            None,
        ),
        Err(e) => (CheckStatus::Fail, e.to_string(), None),
    }
}

fn check_a4(model: &DiffusionModel, probe: ProbeSpec) -> (CheckStatus, String) {
    let inverse_b = |p: ProbeSpec| -> Result<Vec<(f64, f64)>, ModelError> {
        p.grid()
            .map(|x| {
                let b = model.diffusion(x)?;
                if b == 0.0 {
                    return Err(ModelError::DegenerateDiffusion { x });
                }
                Ok((x, 1.0 / b.abs()))
            })
            .collect()
    };
    let (base, wide) = match (inverse_b(probe), inverse_b(probe.widened())) {
        (Ok(b), Ok(w)) => (b, w),
        (Err(e), _) | (_, Err(e)) => return (CheckStatus::Fail, e.to_string()),
    };
    // least-squares slope of ln(1/|b|) against ln(1+|x|) over |x| >= 1
    let tail: Vec<(f64, f64)> = base
        .iter()
        .filter(|(x, _)| x.abs() >= 1.0)
        .map(|&(x, ib)| ((1.0 + x.abs()).ln(), ib.ln()))
        .collect();
    let m = tail.len() as f64;
    let (mt, my) = tail
        .iter()
        .fold((0.0, 0.0), |(st, sy), (t, y)| (st + t / m, sy + y / m));
    let (sty, stt) = tail.iter().fold((0.0, 0.0), |(sty, stt), (t, y)| {
        (sty + (t - mt) * (y - my), stt + (t - mt) * (t - mt))
    });
    let p = if stt > 0.0 { (sty / stt).max(0.0) } else { 0.0 };
    let k_of = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|&(x, ib)| ib / (1.0 + x.abs().powf(p)))
            .fold(0.0_f64, f64::max)
    };
    let (k_base, k_wide) = (k_of(&base), k_of(&wide));
    let witness = format!("p ~ {p:.3}, K ~ {k_base:.4} (radius x2: {k_wide:.4})");
    if k_base.is_finite() && k_wide <= 1.5 * k_base {
        (CheckStatus::Pass, witness)
    } else {
        (CheckStatus::Fail, witness)
    }
}

fn check_a5(law: Option<&InvariantLaw>) -> (CheckStatus, String) {
    let Some(law) = law else {
        return (
            CheckStatus::Inconclusive,
            "needs a finite invariant law (A3, A6)".into(),
        );
    };
    for r in (2..=MOMENT_ORDERS_CHECKED).step_by(2) {
        match law.moment(r) {
            Ok(_) => {}
            Err(ModelError::Quad(QuadError::BudgetExceeded { .. })) => {
                return (
                    CheckStatus::Inconclusive,
                    format!("quadrature budget exhausted for r = {r}"),
                )
            }
            Err(e) => return (CheckStatus::Fail, format!("E|xi|^{r}: {e}")),
        }
    }
    (
        CheckStatus::Pass,
        format!("E|xi|^r finite for even r <= {MOMENT_ORDERS_CHECKED}; higher orders not certified"),
    )
}

fn check_a6(model: &DiffusionModel, probe: ProbeSpec) -> (CheckStatus, String) {
    let mut max_abs = 0.0_f64;
    for x in probe.grid() {
        match model.drift(x) {
            Ok(a) => max_abs = max_abs.max(a.abs()),
            Err(e) => return (CheckStatus::Fail, e.to_string()),
        }
    }
    let witness = format!("max |a| on probe = {max_abs:.4e}");
    if max_abs > ZERO_DRIFT_THRESHOLD {
        (CheckStatus::Pass, witness)
    } else {
        (CheckStatus::Fail, witness)
    }
}

fn check_c7(model: &DiffusionModel, probe: ProbeSpec) -> (CheckStatus, String) {
    const EPS: f64 = 1e-9;
    // sup of c(x)·sgn(x) over the outer decade |x| ∈ [R/10, R]
    let outer_sup = |p: ProbeSpec| -> Result<f64, ModelError> {
        let mut sup = f64::NEG_INFINITY;
        for x in p.grid().filter(|x| x.abs() >= p.radius / 10.0) {
            sup = sup.max(model.c(x)? * x.signum());
        }
        Ok(sup)
    };
    let (base, wide) = match (outer_sup(probe), outer_sup(probe.widened())) {
        (Ok(b), Ok(w)) => (b, w),
        (Err(e), _) | (_, Err(e)) => return (CheckStatus::Fail, e.to_string()),
    };
    let witness = format!("sup c(x)sgn(x) on outer decade = {base:.4e} (radius x2: {wide:.4e})");
    // negative, and not creeping back up to 0 as the radius doubles
    if base < -EPS && wide <= 0.75 * base {
        (CheckStatus::Pass, witness)
    } else {
        (CheckStatus::Fail, witness)
    }
}
