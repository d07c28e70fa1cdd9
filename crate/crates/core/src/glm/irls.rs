use crate::features::DesignMatrix;
use crate::numerics::{ln_factorial, weighted_normal_equations, SolveMode, SymmetricFactor};
use crate::{Error, Result};

use super::{linear_predictors, Family, FitOptions, FittedGlm};

/// Poisson log-likelihood `Σ y·η − e^η − ln y!`.
pub fn poisson_log_likelihood(beta: &[f64], design: &DesignMatrix) -> f64 {
    let eta = linear_predictors(design, beta);
    eta.iter()
        .zip(&design.response)
        .map(|(&e, &y)| y as f64 * e - e.exp() - ln_factorial(y))
        .sum()
}

pub(super) enum Start<'a> {
    /// Initial linear predictor (no coefficients yet).
    Eta(Vec<f64>),
    Beta(&'a [f64]),
}

pub(super) struct IrlsOutcome {
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
    pub rank: usize,
}

/// Weighted normal equations for the Fisher-scoring step at `eta`, with
/// weights `μ/(1+αμ)` and working response `η + (y−μ)/μ`.
pub(super) fn scoring_system(design: &DesignMatrix, eta: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let mut w = Vec::with_capacity(eta.len());
    let mut z = Vec::with_capacity(eta.len());
    for (&e, &y) in eta.iter().zip(&design.response) {
        let mu = e.exp().max(1e-300);
        w.push(mu / (1.0 + alpha * mu));
        z.push(e + (y as f64 - mu) / mu);
    }
    weighted_normal_equations(&design.values, design.cols, &w, &z)
}

/// Max-norm of the score `Xᵀ (y − μ)/(1 + αμ)`.
pub(super) fn score_norm(design: &DesignMatrix, beta: &[f64], alpha: f64) -> f64 {
    let eta = linear_predictors(design, beta);
    let mut score = vec![0.0; design.cols];
    for ((row, &e), &y) in design.values.chunks_exact(design.cols).zip(&eta).zip(&design.response) {
        let mu = e.exp();
        let r = (y as f64 - mu) / (1.0 + alpha * mu);
        for (s, &x) in score.iter_mut().zip(row) {
            *s += x * r;
        }
    }
    score.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(super) fn score_tolerance(design: &DesignMatrix) -> f64 {
    1e-6 * design.rows as f64
}

/// Fisher scoring with step halving. `loglik` evaluates the objective at a
/// coefficient vector; `alpha` selects the NB2 weights (0 for Poisson).
pub(super) fn irls(
    design: &DesignMatrix,
    start: Start<'_>,
    alpha: f64,
    loglik: &dyn Fn(&[f64]) -> f64,
    options: &FitOptions,
) -> Result<IrlsOutcome> {
    let (mut beta, mut ll, mut eta) = match start {
        Start::Eta(eta) => (None, f64::NEG_INFINITY, eta),
        Start::Beta(b) => (Some(b.to_vec()), loglik(b), linear_predictors(design, b)),
    };
    let mut rank = design.cols;
    let mut last_change = f64::INFINITY;
    for iteration in 1..=options.max_iterations {
        let (gram, rhs) = scoring_system(design, &eta, alpha);
        let factor = SymmetricFactor::new(&gram, design.cols, options.solve_mode)?;
        rank = factor.rank();
        let mut candidate = factor.solve(&rhs);
        let mut cand_ll = loglik(&candidate);
        if let Some(prev) = &beta {
            let mut halvings = 0;
            while !(cand_ll >= ll - 1e-12 * ll.abs()) && halvings < 30 {
                for (c, b) in candidate.iter_mut().zip(prev) {
                    *c = 0.5 * (*c + b);
                }
                cand_ll = loglik(&candidate);
                halvings += 1;
            }
        }
        if !cand_ll.is_finite() {
            return Err(Error::Degenerate(format!(
                "log-likelihood became non-finite at IRLS iteration {iteration}"
            )));
        }
        let delta = match &beta {
            Some(prev) => candidate
                .iter()
                .zip(prev)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
            None => f64::INFINITY,
        };
        let rel = (cand_ll - ll).abs() / ll.abs().max(1.0);
        eta = linear_predictors(design, &candidate);
        beta = Some(candidate);
        ll = cand_ll;
        last_change = delta;
        let current = beta.as_deref().unwrap();
        if (delta <= options.beta_tolerance || rel <= options.loglik_tolerance)
            && score_norm(design, current, alpha) <= score_tolerance(design)
        {
            return Ok(IrlsOutcome {
                beta: beta.unwrap(),
                log_likelihood: ll,
                iterations: iteration,
                converged: true,
                last_change,
                rank,
            });
        }
    }
    Ok(IrlsOutcome {
        beta: beta.unwrap_or_else(|| vec![0.0; design.cols]),
        log_likelihood: ll,
        iterations: options.max_iterations,
        converged: false,
        last_change,
        rank,
    })
}

pub(super) fn validate_design(design: &DesignMatrix) -> Result<()> {
    if design.rows == 0 || design.cols == 0 {
        return Err(Error::EmptyInput("design matrix is empty".into()));
    }
    if design.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("design matrix has non-finite entries".into()));
    }
    if design.response.iter().all(|&y| y == 0) {
        return Err(Error::Degenerate(
            "all responses are zero; the log-link MLE does not exist".into(),
        ));
    }
    Ok(())
}

/// Covariance `(XᵀWX)⁻¹` (pseudo-inverse in min-norm mode) at `beta`.
pub(super) fn covariance(
    design: &DesignMatrix,
    beta: &[f64],
    alpha: f64,
    mode: SolveMode,
) -> Result<Vec<f64>> {
    let eta = linear_predictors(design, beta);
    let (gram, _) = scoring_system(design, &eta, alpha);
    Ok(SymmetricFactor::new(&gram, design.cols, mode)?.inverse())
}

pub(super) fn rename_singular(err: Error, design: &DesignMatrix) -> Error {
    match err {
        Error::Singular(msg) => {
            let named = design
                .column_names
                .iter()
                .enumerate()
                .rev()
                .fold(msg, |m, (j, name)| m.replace(&format!("#{j}"), name));
            Error::Singular(named)
        }
        other => other,
    }
}

/// Starting linear predictor `ln((y + ȳ)/2)`, positive for every row
/// once some response is positive.
pub(super) fn initial_eta(design: &DesignMatrix) -> Vec<f64> {
    let mean = design.response.iter().sum::<u64>() as f64 / design.rows as f64;
    design
        .response
        .iter()
        .map(|&y| (0.5 * (y as f64 + mean)).ln())
        .collect()
}

/// Maximum-likelihood Poisson regression with log link.
pub fn fit_poisson(design: &DesignMatrix, options: &FitOptions) -> Result<FittedGlm> {
    validate_design(design)?;
    let loglik = |b: &[f64]| poisson_log_likelihood(b, design);
    let outcome = irls(design, Start::Eta(initial_eta(design)), 0.0, &loglik, options)
        .map_err(|e| rename_singular(e, design))?;
    if !outcome.converged {
        return Err(Error::NonConvergence {
            family: "poisson",
            iterations: outcome.iterations,
            last_change: outcome.last_change,
            last_beta: outcome.beta,
        });
    }
    let cov_beta = covariance(design, &outcome.beta, 0.0, options.solve_mode)?;
    let mut warnings = Vec::new();
    if outcome.rank < design.cols {
        warnings.push(non_identifiable_warning(outcome.rank, design.cols));
    }
    Ok(FittedGlm {
        family: Family::Poisson,
        schema: None,
        column_names: design.column_names.clone(),
        beta: outcome.beta,
        alpha: 0.0,
        cov_beta,
        log_likelihood: outcome.log_likelihood,
        n_obs: design.rows,
        converged: true,
        iterations: outcome.iterations,
        rank: outcome.rank,
        warnings,
    })
}

pub(super) fn non_identifiable_warning(rank: usize, cols: usize) -> String {
    format!(
        "design has rank {rank} < {cols} columns: per-level coefficients are not identifiable \
         (minimum-norm solution) and Wald inference uses the pseudo-inverse covariance"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ln_factorial;

    fn intercept_design(y: &[u64]) -> DesignMatrix {
        DesignMatrix::from_rows(&vec![vec![1.0]; y.len()], y.to_vec()).unwrap()
    }

    #[test]
    fn intercept_only_is_log_mean() {
        let fit = fit_poisson(&intercept_design(&[1, 3]), &FitOptions::default()).unwrap();
        assert!((fit.beta[0] - 2f64.ln()).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn grouped_closed_form() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let d = DesignMatrix::from_rows(&rows, vec![2, 2, 4, 4]).unwrap();
        let fit = fit_poisson(&d, &FitOptions::default()).unwrap();
        assert!((fit.beta[0] - 2f64.ln()).abs() < 1e-10);
        assert!((fit.beta[1] - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn log_likelihood_direct_evaluation() {
        let fit = fit_poisson(&intercept_design(&[3, 3, 3]), &FitOptions::default()).unwrap();
        assert!((fit.beta[0] - 3f64.ln()).abs() < 1e-10);
        let expected = 3.0 * (3.0 * 3f64.ln() - 3.0 - ln_factorial(3));
        assert!((fit.log_likelihood - expected).abs() < 1e-9);
    }

    #[test]
    fn all_zero_response_is_degenerate() {
        let err = fit_poisson(&intercept_design(&[0, 0, 0]), &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn collinear_design_names_column() {
        let rows = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let mut d = DesignMatrix::from_rows(&rows, vec![1, 2, 3]).unwrap();
        d.column_names = vec!["Intercept".into(), "Dup".into()];
        let err = fit_poisson(&d, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Singular(ref m) if m.contains("Dup")), "{err}");
    }

    #[test]
    fn covariance_is_inverse_information() {
        // intercept-only: Var(β₀) = 1 / Σμ = 1 / (n ȳ)
        let fit = fit_poisson(&intercept_design(&[1, 2, 3, 6]), &FitOptions::default()).unwrap();
        assert!((fit.cov_beta[0] - 1.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn non_convergence_reports_iterate() {
        let opts = FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        };
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, f64::from(i) / 10.0]).collect();
        let y = (0..20).map(|i| (i % 7) as u64).collect();
        let d = DesignMatrix::from_rows(&rows, y).unwrap();
        match fit_poisson(&d, &opts) {
            Err(Error::NonConvergence {
                iterations,
                last_beta,
                ..
            }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last_beta.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
