//! Adaptive Gauss–Kronrod quadrature on finite intervals and on the real line.
//!
//! Finite intervals use globally adaptive bisection with the 7/15-point
//! Gauss–Kronrod pair and the usual QUADPACK error scaling. Integrals over ℝ
//! are truncated to `[-R, R]` with `R` doubling from 8; the size of the last
//! doubling's increment is both the convergence test and the divergence
//! detector.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub converged: bool,
    pub evaluations: u64,
    /// Set by [`integrate_real_line`] when the tail increments never became
    /// negligible before the truncation radius hit its cap.
    pub suspected_divergent: bool,
}

impl QuadResult {
    /// Turns a non-converged result into the matching error.
    pub fn require_converged(self) -> Result<Self, QuadError> {
        match (self.converged, self.suspected_divergent) {
            (true, _) => Ok(self),
            (false, true) => Err(QuadError::SuspectedDivergent { best: self }),
            (false, false) => Err(QuadError::BudgetExceeded { best: self }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x}")]
    NonFiniteValue { x: f64 },
    #[error("evaluation budget exhausted (best estimate {} ± {})", best.value, best.abs_error_estimate)]
    BudgetExceeded { best: QuadResult },
    #[error("integral suspected divergent (partial value {} at the largest radius)", best.value)]
    SuspectedDivergent { best: QuadResult },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

/// Tolerances and evaluation budget shared by the integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evaluations: u64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_evaluations: 1_000_000,
        }
    }
}

impl QuadConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Starting truncation radius for integrals over ℝ.
pub const REAL_LINE_START_RADIUS: f64 = 8.0;
/// Largest truncation radius tried before declaring divergence.
pub const REAL_LINE_MAX_RADIUS: f64 = 16384.0;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Panel, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFiniteValue { x })
        }
    };
    let mut lo = [0.0; 7];
    let mut hi = [0.0; 7];
    let f_center = eval(center)?;
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;
    let mut res_abs = kronrod.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        lo[j] = eval(center - dx)?;
        hi[j] = eval(center + dx)?;
        let pair = lo[j] + hi[j];
        kronrod += WGK[j] * pair;
        res_abs += WGK[j] * (lo[j].abs() + hi[j].abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((lo[j] - mean).abs() + (hi[j] - mean).abs());
    }
    let width = half.abs();
    let value = kronrod * half;
    res_abs *= width;
    res_asc *= width;
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]` with the default budget.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult, QuadError> {
    integrate_with(f, a, b, &QuadConfig::with_tolerances(rel_tol, abs_tol))
}

/// Globally adaptive integration over a finite interval.
///
/// Running out of budget is not an error: the best estimate comes back with
/// `converged == false`. Only a non-finite integrand value is fatal.
pub fn integrate_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            converged: true,
            evaluations: 0,
            suspected_divergent: false,
        });
    }
    let first = kronrod15(&mut f, a, b)?;
    let mut evaluations = 15;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::from([first]);
    let mut converged = error <= cfg.target(value);
    while !converged && evaluations + 30 <= cfg.max_evaluations {
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // panel cannot be split any further in double precision
            heap.push(worst);
            break;
        }
        let left = kronrod15(&mut f, worst.a, mid)?;
        let right = kronrod15(&mut f, mid, worst.b)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        converged = error <= cfg.target(value);
        if heap.len() % 64 == 0 {
            (value, error) = totals(&heap);
        }
    }
    (value, error) = totals(&heap);
    Ok(QuadResult {
        value,
        abs_error_estimate: error,
        converged: error <= cfg.target(value),
        evaluations,
        suspected_divergent: false,
    })
}

// Recomputes running sums from scratch to stop drift from repeated updates.
fn totals(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = crate::est::KahanSum::new();
    let mut error = 0.0;
    for p in panels {
        value.add(p.value);
        error += p.error;
    }
    (value.value(), error)
}

/// Integrates `f` over ℝ with the default budget per truncation window.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(f: F, rel_tol: f64, abs_tol: f64) -> Result<QuadResult, QuadError> {
    integrate_real_line_with(f, &QuadConfig::with_tolerances(rel_tol, abs_tol))
}

/// Integrates over `[-R, R]`, doubling `R` from [`REAL_LINE_START_RADIUS`]
/// until the added tails change the value by less than the tolerance.
///
/// If that never happens by [`REAL_LINE_MAX_RADIUS`] the result comes back
/// with `converged == false` and `suspected_divergent == true`.
pub fn integrate_real_line_with<F: FnMut(f64) -> f64>(mut f: F, cfg: &QuadConfig) -> Result<QuadResult, QuadError> {
    let mut radius = REAL_LINE_START_RADIUS;
    let core = integrate_with(&mut f, -radius, radius, cfg)?;
    let mut value = core.value;
    let mut error = core.abs_error_estimate;
    let mut evaluations = core.evaluations;
    let mut pieces_converged = core.converged;
    loop {
        if radius >= REAL_LINE_MAX_RADIUS {
            return Ok(QuadResult {
                value,
                abs_error_estimate: error,
                converged: false,
                evaluations,
                suspected_divergent: true,
            });
        }
        let left = integrate_with(&mut f, -2.0 * radius, -radius, cfg)?;
        let right = integrate_with(&mut f, radius, 2.0 * radius, cfg)?;
        radius *= 2.0;
        let increment = left.value + right.value;
        value += increment;
        error += left.abs_error_estimate + right.abs_error_estimate;
        evaluations += left.evaluations + right.evaluations;
        pieces_converged &= left.converged && right.converged;
        if increment.abs() <= cfg.target(value) {
            return Ok(QuadResult {
                value,
                abs_error_estimate: error + increment.abs(),
                converged: pieces_converged,
                evaluations,
                suspected_divergent: false,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_sine() {
        let r = integrate(|x| x * x, 0.0, 1.0, 1e-10, 1e-12).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
        let r = integrate(f64::sin, 0.0, PI, 1e-10, 1e-12).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(r.abs_error_estimate <= 1e-10 * 2.0);
    }

    #[test]
    fn truncated_gaussian() {
        let r = integrate(|x| (-x * x).exp(), -5.0, 5.0, 1e-10, 1e-12).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn real_line_gaussians() {
        let r = integrate_real_line(|x| (-x * x).exp(), 1e-10, 1e-12).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.772_453_850_905_516).abs() < 1e-9);
        let r = integrate_real_line(|x| (-2.0 * x * x).exp(), 1e-10, 1e-12).unwrap();
        assert!((r.value - (PI / 2.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn slow_tail_flags_divergence() {
        let r = integrate_real_line(|x| (1.0 + x * x).powf(-0.3), 1e-10, 1e-12).unwrap();
        assert!(!r.converged);
        assert!(r.suspected_divergent);
        assert!(matches!(
            r.require_converged(),
            Err(QuadError::SuspectedDivergent { .. })
        ));
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let err = integrate(|x| 1.0 / x, -1.0, 1.0, 1e-10, 1e-12).unwrap_err();
        assert_eq!(err, QuadError::NonFiniteValue { x: 0.0 });
        let err = integrate(|_| f64::NAN, 0.0, 1.0, 1e-10, 1e-12).unwrap_err();
        assert_eq!(err, QuadError::NonFiniteValue { x: 0.5 });
    }

    #[test]
    fn budget_exhaustion_keeps_best_estimate() {
        let cfg = QuadConfig {
            rel_tol: 1e-15,
            abs_tol: 0.0,
            max_evaluations: 200,
        };
        let r = integrate_with(|x| x.abs().sqrt(), -1.0, 1.0, &cfg).unwrap();
        assert!(!r.converged);
        assert!(r.evaluations <= 200);
        assert!((r.value - 4.0 / 3.0).abs() < 1e-3);
        assert!(matches!(r.require_converged(), Err(QuadError::BudgetExceeded { .. })));
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(integrate(|x| x, 1.0, 0.0, 1e-10, 1e-12).is_err());
        assert_eq!(integrate(|x| x, 1.0, 1.0, 1e-10, 1e-12).unwrap().value, 0.0);
    }
}
