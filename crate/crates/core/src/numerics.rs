//! Special functions and the symmetric solves behind IRLS.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ln_gamma is defined for finite x > 0, got {x}"
        )));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let series = LANCZOS_COEFFS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS_COEFFS[0], |acc, (i, c)| acc + c / (x + (i + 1) as f64));
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + series.ln()
}

/// `ln(k!)` for a non-negative integer count.
pub fn ln_factorial(k: u64) -> f64 {
    ln_gamma_unchecked(k as f64 + 1.0)
}

/// Standard normal CDF (Hart's double-precision rational approximation).
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let x = z.abs();
    let tail = if x > 37.0 {
        0.0
    } else {
        let e = (-0.5 * x * x).exp();
        if x < 7.071_067_811_865_47 {
            let num = (((((0.035_262_496_599_891_1 * x + 0.700_383_064_443_688) * x
                + 6.373_962_203_531_65)
                * x
                + 33.912_866_078_383)
                * x
                + 112.079_291_497_871)
                * x
                + 221.213_596_169_931)
                * x
                + 220.206_867_912_376;
            let den = ((((((0.088_388_347_648_318_4 * x + 1.755_667_163_182_64) * x
                + 16.064_177_579_207)
                * x
                + 86.780_732_202_946_1)
                * x
                + 296.564_248_779_674)
                * x
                + 637.333_633_378_831)
                * x
                + 793.826_512_519_948)
                * x
                + 440.413_735_824_752;
            e * num / den
        } else {
            let mut b = x + 0.65;
            b = x + 4.0 / b;
            b = x + 3.0 / b;
            b = x + 2.0 / b;
            b = x + 1.0 / b;
            e / b / 2.506_628_274_631
        }
    };
    if z > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided normal p-value for a z statistic, computed from the lower tail
/// to keep precision for large |z|.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * normal_cdf(-z.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Cholesky with escalating diagonal jitter; structural rank deficiency
    /// is an error.
    Strict,
    /// Minimum-norm solution through a symmetric eigendecomposition.
    MinNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSolveResult {
    pub solution: Vec<f64>,
    pub jitter_applied: f64,
    pub condition_flag: bool,
    pub rank: usize,
}

/// A column is structurally dependent when its Cholesky pivot is this small
/// relative to its diagonal, i.e. 1 - R² against earlier columns.
const STRUCTURAL_RATIO: f64 = 1e-13;
/// Pivots below this ratio trigger jitter.
const PIVOT_RATIO: f64 = 1e-10;
const JITTER_STEPS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
const MIN_NORM_TOL: f64 = 1e-8;

/// Factorization of a symmetric positive semi-definite `p × p` matrix.
#[derive(Debug, Clone)]
pub enum SymmetricFactor {
    Cholesky {
        lower: Vec<f64>,
        dim: usize,
        jitter: f64,
    },
    Pseudo {
        vectors: DMatrix<f64>,
        inv_values: DVector<f64>,
        rank: usize,
    },
}

/// Cholesky returning the lower factor or the first failing pivot ratio.
fn cholesky(a: &[f64], dim: usize, jitter: f64) -> std::result::Result<Vec<f64>, (usize, f64)> {
    let mut l = vec![0.0; dim * dim];
    for j in 0..dim {
        let diag = a[j * dim + j] + jitter;
        let mut d = diag;
        for k in 0..j {
            d -= l[j * dim + k] * l[j * dim + k];
        }
        let ratio = if diag > 0.0 { d / diag } else { f64::NEG_INFINITY };
        if !(ratio > PIVOT_RATIO) {
            return Err((j, ratio));
        }
        let root = d.sqrt();
        l[j * dim + j] = root;
        for i in (j + 1)..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = s / root;
        }
    }
    Ok(l)
}

/// Indices of columns whose pivot ratio falls below `STRUCTURAL_RATIO`,
/// found by a Cholesky pass that drops each such column and continues.
fn dependent_columns(a: &[f64], dim: usize) -> Vec<usize> {
    let mut l = vec![0.0; dim * dim];
    let mut dependent = Vec::new();
    for j in 0..dim {
        let diag = a[j * dim + j];
        let mut d = diag;
        for k in 0..j {
            d -= l[j * dim + k] * l[j * dim + k];
        }
        if !(diag > 0.0) || d / diag <= STRUCTURAL_RATIO {
            dependent.push(j);
            continue;
        }
        let root = d.sqrt();
        l[j * dim + j] = root;
        for i in (j + 1)..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = s / root;
        }
    }
    dependent
}

impl SymmetricFactor {
    pub fn new(a: &[f64], dim: usize, mode: SolveMode) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: a.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite entry in normal equations".into()));
        }
        match mode {
            SolveMode::Strict => Self::strict(a, dim),
            SolveMode::MinNorm => Ok(Self::min_norm(a, dim)),
        }
    }

    fn strict(a: &[f64], dim: usize) -> Result<Self> {
        match cholesky(a, dim, 0.0) {
            Ok(lower) => {
                return Ok(SymmetricFactor::Cholesky {
                    lower,
                    dim,
                    jitter: 0.0,
                })
            }
            Err(_) => {
                let dependent = dependent_columns(a, dim);
                if !dependent.is_empty() {
                    return Err(Error::Singular(format!(
                        "linearly dependent columns: {}",
                        dependent
                            .iter()
                            .map(|j| format!("#{j}"))
                            .collect::<Vec<_>>()
                            .join(", ")
                    )));
                }
            }
        }
        let scale = (0..dim).map(|j| a[j * dim + j]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for step in JITTER_STEPS {
            let jitter = step * scale;
            if let Ok(lower) = cholesky(a, dim, jitter) {
                log::warn!("symmetric solve needed diagonal jitter {jitter:e}");
                return Ok(SymmetricFactor::Cholesky { lower, dim, jitter });
            }
        }
        Err(Error::Singular(
            "factorization failed even with maximal jitter".into(),
        ))
    }

    fn min_norm(a: &[f64], dim: usize) -> Self {
        let m = DMatrix::from_row_slice(dim, dim, a);
        let max_diag = m.diagonal().iter().copied().fold(0.0, f64::max);
        let eig = SymmetricEigen::new(m);
        let tol = MIN_NORM_TOL * max_diag;
        let mut rank = 0;
        let inv_values = eig.eigenvalues.map(|v| {
            if v > tol {
                rank += 1;
                1.0 / v
            } else {
                0.0
            }
        });
        SymmetricFactor::Pseudo {
            vectors: eig.eigenvectors,
            inv_values,
            rank,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SymmetricFactor::Cholesky { dim, .. } => *dim,
            SymmetricFactor::Pseudo { vectors, .. } => vectors.nrows(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            SymmetricFactor::Cholesky { dim, .. } => *dim,
            SymmetricFactor::Pseudo { rank, .. } => *rank,
        }
    }

    pub fn jitter(&self) -> f64 {
        match self {
            SymmetricFactor::Cholesky { jitter, .. } => *jitter,
            SymmetricFactor::Pseudo { .. } => 0.0,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            SymmetricFactor::Cholesky { lower, dim, .. } => {
                let n = *dim;
                let mut y = b.to_vec();
                for i in 0..n {
                    let mut s = y[i];
                    for k in 0..i {
                        s -= lower[i * n + k] * y[k];
                    }
                    y[i] = s / lower[i * n + i];
                }
                for i in (0..n).rev() {
                    let mut s = y[i];
                    for k in (i + 1)..n {
                        s -= lower[k * n + i] * y[k];
                    }
                    y[i] = s / lower[i * n + i];
                }
                y
            }
            SymmetricFactor::Pseudo {
                vectors,
                inv_values,
                ..
            } => {
                let rhs = DVector::from_column_slice(b);
                let projected = vectors.transpose() * rhs;
                let scaled = projected.component_mul(inv_values);
                (vectors * scaled).iter().copied().collect()
            }
        }
    }

    /// Inverse (or pseudo-inverse), row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.dim();
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        // symmetrize away rounding asymmetry
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = avg;
                inv[j * n + i] = avg;
            }
        }
        inv
    }
}

/// `(XᵀWX, XᵀWz)` for row-major `x` with `cols` columns.
pub fn weighted_normal_equations(x: &[f64], cols: usize, w: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut gram = vec![0.0; cols * cols];
    let mut rhs = vec![0.0; cols];
    for ((row, &wi), &zi) in x.chunks_exact(cols).zip(w).zip(z) {
        for (j, &xj) in row.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let wxj = wi * xj;
            rhs[j] += wxj * zi;
            let gram_row = &mut gram[j * cols..j * cols + j + 1];
            for (g, &xk) in gram_row.iter_mut().zip(&row[..=j]) {
                *g += wxj * xk;
            }
        }
    }
    for j in 0..cols {
        for k in 0..j {
            gram[k * cols + j] = gram[j * cols + k];
        }
    }
    (gram, rhs)
}

/// Solves the weighted least-squares normal equations `(XᵀWX)β = XᵀWz`.
pub fn solve_weighted_ls(
    x: &[f64],
    cols: usize,
    w: &[f64],
    z: &[f64],
    mode: SolveMode,
) -> Result<SymmetricSolveResult> {
    let n = w.len();
    if n == 0 || cols == 0 {
        return Err(Error::EmptyInput("weighted least squares needs n, p >= 1".into()));
    }
    if x.len() != n * cols || z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n * cols,
            actual: x.len(),
        });
    }
    if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
        return Err(Error::InvalidArgument("weights must be positive and finite".into()));
    }
    let (gram, rhs) = weighted_normal_equations(x, cols, w, z);
    let factor = SymmetricFactor::new(&gram, cols, mode)?;
    let solution = factor.solve(&rhs);
    let jitter_applied = factor.jitter();
    let rank = factor.rank();
    Ok(SymmetricSolveResult {
        solution,
        jitter_applied,
        condition_flag: jitter_applied > 0.0 || rank < cols,
        rank,
    })
}
