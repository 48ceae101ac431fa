//! Reference Monte Carlo results for three ergodic test models with θ = 2,
//! x₀ = 1, 100 Milstein paths per cell (published values).

use crate::model::DiffusionModel;

pub const THETA: f64 = 2.0;
pub const X0: f64 = 1.0;
pub const REPLICATES: u32 = 100;
pub const NS: [u64; 6] = [50, 100, 500, 1000, 2000, 5000];
pub const ALPHAS: [f64; 3] = [0.1, 0.5, 0.9];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCase {
    pub id: u8,
    pub a: &'static str,
    pub b: &'static str,
    /// `[alpha][n]` in the order of [`ALPHAS`] and [`NS`].
    pub mean: [[f64; 6]; 3],
    pub std: [[f64; 6]; 3],
}

impl ReferenceCase {
    pub fn model(&self) -> DiffusionModel {
        DiffusionModel::parse(self.a, self.b, THETA, X0).expect("reference coefficients parse")
    }

    /// Reference `(mean, std)` for a grid cell, if it is one.
    pub fn cell(&self, n: u64, alpha: f64) -> Option<(f64, f64)> {
        let i = ALPHAS.iter().position(|&a| a == alpha)?;
        let j = NS.iter().position(|&m| m == n)?;
        Some((self.mean[i][j], self.std[i][j]))
    }
}

pub const CASES: [ReferenceCase; 3] = [
    ReferenceCase {
        id: 1,
        a: "1-x",
        b: "2+sin(x)",
        mean: [
            [3.05812, 2.97626, 2.73973, 2.58453, 2.55888, 2.53879],
            [2.11065, 2.15066, 2.08157, 2.05626, 2.03686, 2.03479],
            [2.02509, 2.01702, 2.02024, 2.01308, 2.00626, 2.00289],
        ],
        std: [
            [2.06388, 2.00007, 1.43273, 1.34689, 1.26920, 1.22077],
            [0.62613, 0.56038, 0.31621, 0.28909, 0.22875, 0.18187],
            [0.27874, 0.19589, 0.09995, 0.06918, 0.04850, 0.03028],
        ],
    },
    ReferenceCase {
        id: 2,
        a: "-atan(x)",
        b: "1",
        mean: [
            [2.69321, 2.66637, 2.65053, 2.66356, 2.59903, 2.46685],
            [2.12190, 2.10459, 2.01048, 1.99535, 2.01712, 1.99517],
            [1.95538, 1.97446, 1.98035, 1.99565, 2.00266, 2.00290],
        ],
        std: [
            [2.03142, 2.06075, 1.82903, 1.73034, 1.68212, 1.50186],
            [0.85304, 0.69484, 0.48803, 0.37807, 0.31746, 0.25846],
            [0.35057, 0.26796, 0.12235, 0.09050, 0.06496, 0.04533],
        ],
    },
    ReferenceCase {
        id: 3,
        a: "-x/(1+x^2)",
        b: "1",
        mean: [
            [1.99507, 1.99813, 1.97122, 1.99255, 1.98366, 1.94811],
            [1.87038, 1.87897, 1.89022, 1.92593, 1.94964, 1.96624],
            [1.90341, 1.92162, 2.00240, 2.00068, 2.00491, 1.99347],
        ],
        std: [
            [2.44248, 2.53060, 2.17322, 2.13403, 2.05527, 1.80128],
            [1.01932, 0.89315, 0.54811, 0.49005, 0.41787, 0.33855],
            [0.47656, 0.33693, 0.18136, 0.13173, 0.09595, 0.07033],
        ],
    },
];

pub fn case(id: u8) -> Option<&'static ReferenceCase> {
    CASES.iter().find(|c| c.id == id)
}
