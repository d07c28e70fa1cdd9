//! Log-link count regression: Poisson and NB2 (variance `μ + αμ²`) fitted
//! by iteratively reweighted least squares, with overdispersion testing
//! and Wald inference.

mod dispersion;
mod irls;
mod negbin;

pub use dispersion::{dispersion_check, DispersionReport, OVERDISPERSION_PEARSON_RATIO};
pub use irls::{fit_poisson, poisson_log_likelihood};
pub use negbin::{fit_negbin, moment_alpha, nb_alpha_score, nb_log_likelihood};

use serde::{Deserialize, Serialize};

use crate::features::{Coding, DesignMatrix, FeatureSchema};
use crate::numerics::{two_sided_p, SolveMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "poisson")]
    Poisson,
    #[serde(rename = "negbin2")]
    NegBinomial2,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::NegBinomial2 => "negbin2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// IRLS stops when max |Δβ| falls to this.
    pub beta_tolerance: f64,
    /// ...or when the relative log-likelihood change falls to this.
    pub loglik_tolerance: f64,
    /// Outer NB loop stops when the joint relative log-likelihood change
    /// falls to this.
    pub joint_tolerance: f64,
    pub max_outer_iterations: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub solve_mode: SolveMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 100,
            beta_tolerance: 1e-8,
            loglik_tolerance: 1e-10,
            joint_tolerance: 1e-9,
            max_outer_iterations: 200,
            alpha_min: 1e-8,
            alpha_max: 1e4,
            solve_mode: SolveMode::Strict,
        }
    }
}

impl FitOptions {
    /// Defaults with the solve mode the schema needs: minimum-norm for the
    /// rank-deficient full dummy coding.
    pub fn for_schema(schema: &FeatureSchema) -> Self {
        FitOptions {
            solve_mode: match schema.coding {
                Coding::ReferenceCell => SolveMode::Strict,
                Coding::FullDummy => SolveMode::MinNorm,
            },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGlm {
    pub family: Family,
    pub schema: Option<FeatureSchema>,
    pub column_names: Vec<String>,
    pub beta: Vec<f64>,
    /// NB2 dispersion; 0 for Poisson.
    pub alpha: f64,
    /// Row-major `p × p` covariance (pseudo-inverse when not identifiable).
    pub cov_beta: Vec<f64>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub rank: usize,
    pub warnings: Vec<String>,
}

impl FittedGlm {
    pub fn n_params(&self) -> usize {
        self.beta.len()
    }

    pub fn identifiable(&self) -> bool {
        self.rank == self.beta.len()
    }

    pub fn with_schema(mut self, schema: FeatureSchema) -> Self {
        self.schema = Some(schema);
        self
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.beta.len(),
                actual: x.len(),
            });
        }
        Ok(dot(x, &self.beta))
    }

    pub fn std_errors(&self) -> Vec<f64> {
        let p = self.beta.len();
        (0..p).map(|j| self.cov_beta[j * p + j].max(0.0).sqrt()).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest linear predictor passed to `exp`.
pub(crate) const ETA_MAX: f64 = 700.0;

pub(crate) fn linear_predictors(design: &DesignMatrix, beta: &[f64]) -> Vec<f64> {
    design
        .values
        .chunks_exact(design.cols)
        .map(|row| dot(row, beta).min(ETA_MAX))
        .collect()
}

/// `exp(xᵀβ)`.
pub fn predict_mean(model: &FittedGlm, x: &[f64]) -> Result<f64> {
    Ok(model.linear_predictor(x)?.min(ETA_MAX).exp())
}

pub fn predict_all(model: &FittedGlm, design: &DesignMatrix) -> Result<Vec<f64>> {
    if design.cols != model.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: model.beta.len(),
            actual: design.cols,
        });
    }
    Ok(linear_predictors(design, &model.beta)
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Root mean squared error of `predicted` against `actual`.
pub fn rmse_of(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput("rmse of an empty set".into()));
    }
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (a - p) * (a - p))
        .sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

pub fn rmse(model: &FittedGlm, design: &DesignMatrix) -> Result<f64> {
    if design.rows == 0 {
        return Err(Error::EmptyInput("rmse of an empty design".into()));
    }
    rmse_of(&predict_all(model, design)?, &design.response_f64())
}

/// `100 · (e^coefficient − 1)`.
pub fn percent_change(coefficient: f64) -> f64 {
    100.0 * coefficient.exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub std_err: f64,
    pub z: f64,
    pub p_value: f64,
    /// Zero standard error; `p_value` is reported as 0.
    pub degenerate: bool,
}

pub fn wald_row(coefficient: f64, std_err: f64) -> WaldRow {
    if std_err > 0.0 && std_err.is_finite() {
        let z = coefficient / std_err;
        WaldRow {
            std_err,
            z,
            p_value: two_sided_p(z),
            degenerate: false,
        }
    } else {
        WaldRow {
            std_err: 0.0,
            z: 0.0,
            p_value: 0.0,
            degenerate: true,
        }
    }
}

pub fn wald_inference(model: &FittedGlm) -> Vec<WaldRow> {
    model
        .beta
        .iter()
        .zip(model.std_errors())
        .map(|(&b, se)| wald_row(b, se))
        .collect()
}
