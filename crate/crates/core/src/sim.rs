//! Euler–Maruyama and Milstein simulation at the observation times `k/n`.
//!
//! Every path owns one ChaCha8 stream seeded from a 64-bit seed, so a path
//! depends only on `(model, scheme, method, seed)` and never on scheduling.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{DomainError, Expr};
use crate::model::DiffusionModel;

/// Identifies the normal generator; recorded in every output artifact.
pub const GENERATOR_ID: &str = "chacha8-ziggurat/rand_chacha-0.9/rand_distr-0.5";
/// `|X|` beyond this aborts a path.
pub const BLOWUP_THRESHOLD: f64 = 1e12;
/// Step of the central-difference fallback for `b'` at kinks of `abs`.
pub const FD_FALLBACK_STEP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Milstein,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Milstein => "milstein",
        })
    }
}

impl FromStr for Method {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(Method::Euler),
            "milstein" => Ok(Method::Milstein),
            other => Err(SimError::InvalidScheme(format!(
                "unknown method `{other}` (expected euler or milstein)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid observation scheme: {0}")]
    InvalidScheme(String),
    #[error("numerical blowup at observation {observation}, substep {substep} (|X| = {value:e})")]
    NumericalBlowup { observation: u64, substep: u32, value: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("integration budget of {limit} steps exceeded ({requested} requested)")]
    BudgetExceeded { requested: f64, limit: u64 },
}

/// Observation at times `k/n` for `k = 0..=N`, `N = ⌊n^{1+α}⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationScheme {
    n: u64,
    alpha: f64,
    substeps: u32,
}

impl ObservationScheme {
    pub fn new(n: u64, alpha: f64, substeps: u32) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::InvalidScheme("n must be positive".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SimError::InvalidScheme(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if substeps == 0 {
            return Err(SimError::InvalidScheme("substeps must be positive".into()));
        }
        Ok(Self { n, alpha, substeps })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    /// `N = ⌊n^{1+α}⌋`. A relative nudge of a few ulps keeps exact integer
    /// powers such as `4^{1.5} = 8` from flooring down.
    pub fn observations(&self) -> u64 {
        let v = (self.n as f64).powf(1.0 + self.alpha);
        ((v * (1.0 + 4.0 * f64::EPSILON)).floor() as u64).max(1)
    }

    /// `Δ = 1/n`.
    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `T = N/n`.
    pub fn horizon(&self) -> f64 {
        self.observations() as f64 / self.n as f64
    }
}

/// `(X_{k/n})_{k=0..N}` plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedPath {
    pub scheme: ObservationScheme,
    pub values: Vec<f64>,
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub fingerprint: Option<String>,
    pub generator: Option<String>,
    /// Steps where `b'` came from finite differences instead of the symbolic
    /// derivative.
    pub derivative_fallbacks: u64,
}

impl ObservedPath {
    /// Wraps externally observed values.
    pub fn from_values(scheme: ObservationScheme, values: Vec<f64>) -> Self {
        Self {
            scheme,
            values,
            seed: None,
            method: None,
            fingerprint: None,
            generator: None,
            derivative_fallbacks: 0,
        }
    }
}

/// Mixes a master seed and a replicate index into a per-path seed.
///
/// `master + (index+1)·γ` is injective in `index` for odd `γ`, and the
/// SplitMix64 finalizer is a bijection, so distinct indices never collide.
pub fn derive_seed(master: u64, replicate_index: u64) -> u64 {
    const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut z = master.wrapping_add(replicate_index.wrapping_add(1).wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal variates from one seeded stream.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// One-step map of the scheme for a fixed model.
#[derive(Debug, Clone)]
pub struct Stepper<'m> {
    model: &'m DiffusionModel,
    method: Method,
    diffusion_derivative: Expr,
    fd_fallback_allowed: bool,
    fallbacks: u64,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m DiffusionModel, method: Method) -> Self {
        Self {
            model,
            method,
            diffusion_derivative: model.b.differentiate(),
            fd_fallback_allowed: model.b.contains_abs(),
            fallbacks: 0,
        }
    }

    /// `(a(x), b(x))`.
    #[inline]
    pub fn coefficients(&self, x: f64) -> Result<(f64, f64), DomainError> {
        Ok((self.model.a.evaluate(x)?, self.model.b.evaluate(x)?))
    }

    /// `x + θ a h + b √h z [+ ½ b b' h (z² - 1)]` with `a`, `b` already
    /// evaluated at `x`.
    #[inline]
    pub fn advance(&mut self, x: f64, a: f64, b: f64, h: f64, sqrt_h: f64, z: f64) -> Result<f64, DomainError> {
        let euler = x + self.model.theta * a * h + b * sqrt_h * z;
        match self.method {
            Method::Euler => Ok(euler),
            Method::Milstein => {
                let db = self.diffusion_slope(x)?;
                Ok(euler + 0.5 * b * db * h * (z * z - 1.0))
            }
        }
    }

    fn diffusion_slope(&mut self, x: f64) -> Result<f64, DomainError> {
        match self.diffusion_derivative.evaluate(x) {
            Ok(v) => Ok(v),
            Err(_) if self.fd_fallback_allowed => {
                self.fallbacks += 1;
                let b = &self.model.b;
                let h = FD_FALLBACK_STEP;
                Ok((b.evaluate(x + h)? - b.evaluate(x - h)?) / (2.0 * h))
            }
            Err(e) => Err(e),
        }
    }

    pub fn derivative_fallbacks(&self) -> u64 {
        self.fallbacks
    }
}

/// One observation interval `[(k-1)/n, k/n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub k: u64,
    pub x_prev: f64,
    /// `a(x_prev)`
    pub a_prev: f64,
    /// `b(x_prev)`
    pub b_prev: f64,
    pub x_next: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DriveStats {
    pub derivative_fallbacks: u64,
}

/// Runs the scheme from `x0` and hands every observation interval to
/// `observer`; the observer returns `false` to stop early.
pub fn drive<F>(
    model: &DiffusionModel,
    scheme: &ObservationScheme,
    method: Method,
    seed: u64,
    mut observer: F,
) -> Result<DriveStats, SimError>
where
    F: FnMut(&Observation) -> bool,
{
    let mut stepper = Stepper::new(model, method);
    let mut normals = NormalStream::new(seed);
    let m = scheme.substeps();
    let h = scheme.step() / m as f64;
    let sqrt_h = h.sqrt();
    let mut x = model.x0;
    for k in 1..=scheme.observations() {
        let x_prev = x;
        let (a_prev, b_prev) = stepper.coefficients(x)?;
        let (mut a, mut b) = (a_prev, b_prev);
        for s in 0..m {
            if s > 0 {
                (a, b) = stepper.coefficients(x)?;
            }
            let z = normals.next_normal();
            x = stepper.advance(x, a, b, h, sqrt_h, z)?;
            if !(x.abs() <= BLOWUP_THRESHOLD) {
                return Err(SimError::NumericalBlowup {
                    observation: k,
                    substep: s,
                    value: x,
                });
            }
        }
        let keep_going = observer(&Observation {
            k,
            x_prev,
            a_prev,
            b_prev,
            x_next: x,
        });
        if !keep_going {
            break;
        }
    }
    Ok(DriveStats {
        derivative_fallbacks: stepper.derivative_fallbacks(),
    })
}

/// Simulates `(X_{k/n})_{k=0..N}`.
pub fn simulate_path(
    model: &DiffusionModel,
    scheme: &ObservationScheme,
    method: Method,
    seed: u64,
) -> Result<ObservedPath, SimError> {
    let mut values = Vec::with_capacity(scheme.observations() as usize + 1);
    values.push(model.x0);
    let stats = drive(model, scheme, method, seed, |obs| {
        values.push(obs.x_next);
        true
    })?;
    Ok(ObservedPath {
        scheme: *scheme,
        values,
        seed: Some(seed),
        method: Some(method),
        fingerprint: Some(model.fingerprint()),
        generator: Some(GENERATOR_ID.to_string()),
        derivative_fallbacks: stats.derivative_fallbacks,
    })
}

#[derive(Debug, Error)]
pub enum PathFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("path file is missing metadata `{0}`")]
    MissingMetadata(&'static str),
    #[error(transparent)]
    Scheme(#[from] SimError),
}

/// Writes a path as CSV: `# key=value` metadata lines, then `k,t,x` rows.
/// `extra` metadata (e.g. the effective run configuration) is appended to
/// the header block verbatim.
pub fn write_path_csv<W: Write>(path: &ObservedPath, mut out: W, extra: &[(&str, String)]) -> io::Result<()> {
    writeln!(out, "# format=driftmle-path-v1")?;
    writeln!(out, "# n={}", path.scheme.n())?;
    writeln!(out, "# alpha={:?}", path.scheme.alpha())?;
    writeln!(out, "# substeps={}", path.scheme.substeps())?;
    if let Some(seed) = path.seed {
        writeln!(out, "# seed={seed}")?;
    }
    if let Some(method) = path.method {
        writeln!(out, "# method={method}")?;
    }
    if let Some(fp) = &path.fingerprint {
        writeln!(out, "# fingerprint={fp}")?;
    }
    if let Some(generator) = &path.generator {
        writeln!(out, "# generator={generator}")?;
    }
    writeln!(out, "# derivative_fallbacks={}", path.derivative_fallbacks)?;
    for (key, value) in extra {
        writeln!(out, "# {key}={value}")?;
    }
    writeln!(out, "k,t,x")?;
    let n = path.scheme.n() as f64;
    for (k, x) in path.values.iter().enumerate() {
        writeln!(out, "{k},{:?},{x:?}", k as f64 / n)?;
    }
    Ok(())
}

/// Reads a file written by [`write_path_csv`]. Only `n` and `alpha` are
/// required metadata; rows must be numbered `0, 1, 2, …`.
pub fn read_path_csv<R: BufRead>(input: R) -> Result<ObservedPath, PathFileError> {
    let mut n = None;
    let mut alpha = None;
    let mut substeps = 1;
    let mut seed = None;
    let mut method = None;
    let mut fingerprint = None;
    let mut generator = None;
    let mut fallbacks = 0;
    let mut values = Vec::new();
    let mut header_seen = false;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let bad = |message: String| PathFileError::Format { line: lineno, message };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            let Some((key, value)) = meta.trim().split_once('=') else {
                continue;
            };
            let value = value.trim();
            let num_err = |e: &dyn fmt::Display| bad(format!("bad `{key}`: {e}"));
            match key.trim() {
                "n" => n = Some(value.parse::<u64>().map_err(|e| num_err(&e))?),
                "alpha" => alpha = Some(value.parse::<f64>().map_err(|e| num_err(&e))?),
                "substeps" => substeps = value.parse::<u32>().map_err(|e| num_err(&e))?,
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| num_err(&e))?),
                "method" => method = Some(value.parse::<Method>().map_err(|e| num_err(&e))?),
                "fingerprint" => fingerprint = Some(value.to_string()),
                "generator" => generator = Some(value.to_string()),
                "derivative_fallbacks" => fallbacks = value.parse::<u64>().map_err(|e| num_err(&e))?,
                _ => {}
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cols != ["k", "t", "x"] {
                return Err(bad(format!("expected header `k,t,x`, found `{trimmed}`")));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let [k, _t, x] = cols[..] else {
            return Err(bad(format!("expected 3 columns, found {}", cols.len())));
        };
        let k: usize = k.parse().map_err(|e| bad(format!("bad k: {e}")))?;
        if k != values.len() {
            return Err(bad(format!("expected k = {}, found {k}", values.len())));
        }
        let x: f64 = x.parse().map_err(|e| bad(format!("bad x: {e}")))?;
        if !x.is_finite() {
            return Err(bad("x is not finite".into()));
        }
        values.push(x);
    }
    let n = n.ok_or(PathFileError::MissingMetadata("n"))?;
    let alpha = alpha.ok_or(PathFileError::MissingMetadata("alpha"))?;
    Ok(ObservedPath {
        scheme: ObservationScheme::new(n, alpha, substeps)?,
        values,
        seed,
        method,
        fingerprint,
        generator,
        derivative_fallbacks: fallbacks,
    })
}
