//! Drift estimation for ergodic scalar diffusions `dX = θ a(X) dt + b(X) dW`
//! observed at times `k/n`, `k ≤ n^{1+α}`.
//!
//! - [`expr`]: coefficient expressions (parse, evaluate, differentiate)
//! - [`quad`]: adaptive quadrature on intervals and on ℝ
//! - [`model`]: derived functions, invariant law, assumption checks
//! - [`sim`]: Euler–Maruyama / Milstein paths with per-path seeded streams
//! - [`est`]: the discretized maximum likelihood estimator
//! - [`mc`]: replicated experiments, KS normality check, ergodic averages

// `!(x > y)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod est;
pub mod expr;
pub mod mc;
pub mod model;
pub mod par;
pub mod quad;
pub mod sim;
pub mod tables;

pub use est::{estimate, simulate_and_estimate, standardized_error, EstimateResult};
pub use expr::{parse, Expr};
pub use mc::{run_experiment, CellSummary, ExperimentConfig, ExperimentOutcome};
pub use model::{check_assumptions, invariant_law, AssumptionReport, DiffusionModel, InvariantLaw, ProbeSpec};
pub use par::Execution;
pub use sim::{derive_seed, simulate_path, Method, ObservationScheme, ObservedPath};
