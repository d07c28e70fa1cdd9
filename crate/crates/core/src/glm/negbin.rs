//! NB2 likelihood, its α-derivatives and the alternating β/α fit.
//!
//! For integer `y` the gamma-function ratio collapses to a finite product,
//! `Γ(y + 1/α) / Γ(1/α) = α^{-y} Π_{k<y} (1 + kα)`, so the per-row
//! log-likelihood is evaluated as
//!
//! `Σ_{k<y} ln(1+kα) − ln y! − (1/α)·ln(1+αμ) + y·ln μ − y·ln(1+αμ)`
//!
//! which stays accurate as α → 0 (where the Γ form cancels catastrophically).

use crate::features::DesignMatrix;
use crate::numerics::ln_factorial;
use crate::{Error, Result};

use super::irls::{
    covariance, fit_poisson, irls, non_identifiable_warning, rename_singular, Start,
};
use super::{linear_predictors, Family, FitOptions, FittedGlm};

/// Prefix sums over `k < y` that the likelihood and its α-derivatives need.
struct CountTables {
    /// `Σ_{k<y} ln(1 + kα)`
    log_terms: Vec<f64>,
    /// `Σ_{k<y} 1 / (1 + kα)`
    inv_terms: Vec<f64>,
    /// `Σ_{k<y} (1 + 2kα) / (1 + kα)²`
    curv_terms: Vec<f64>,
    /// `ln y!`
    ln_fact: Vec<f64>,
}

impl CountTables {
    fn new(alpha: f64, y_max: u64) -> Self {
        let len = y_max as usize + 1;
        let mut log_terms = Vec::with_capacity(len);
        let mut inv_terms = Vec::with_capacity(len);
        let mut curv_terms = Vec::with_capacity(len);
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for k in 0..len {
            log_terms.push(a);
            inv_terms.push(b);
            curv_terms.push(c);
            let ka = k as f64 * alpha;
            a += ka.ln_1p();
            b += 1.0 / (1.0 + ka);
            c += (1.0 + 2.0 * ka) / ((1.0 + ka) * (1.0 + ka));
        }
        let ln_fact = (0..len as u64).map(ln_factorial).collect();
        CountTables {
            log_terms,
            inv_terms,
            curv_terms,
            ln_fact,
        }
    }
}

fn y_max(design: &DesignMatrix) -> u64 {
    design.response.iter().copied().max().unwrap_or(0)
}

fn loglik_from_eta(eta: &[f64], alpha: f64, design: &DesignMatrix, tables: &CountTables) -> f64 {
    let inv_alpha = 1.0 / alpha;
    let mut total = 0.0;
    for (&e, &y) in eta.iter().zip(&design.response) {
        let mu = e.exp();
        if !mu.is_finite() {
            return f64::NEG_INFINITY;
        }
        let yi = y as usize;
        let l = (alpha * mu).ln_1p();
        total += tables.log_terms[yi] - tables.ln_fact[yi] - inv_alpha * l + y as f64 * e
            - y as f64 * l;
    }
    total
}

/// NB2 log-likelihood at `(beta, alpha)`; `−∞` on a non-finite mean.
pub fn nb_log_likelihood(beta: &[f64], alpha: f64, design: &DesignMatrix) -> f64 {
    if !(alpha > 0.0) {
        return f64::NAN;
    }
    let tables = CountTables::new(alpha, y_max(design));
    loglik_from_eta(&linear_predictors(design, beta), alpha, design, &tables)
}

/// `(ℓ, ∂ℓ/∂α, ∂²ℓ/∂α²)` at fixed linear predictors.
fn alpha_derivatives(eta: &[f64], alpha: f64, design: &DesignMatrix) -> (f64, f64, f64) {
    let tables = CountTables::new(alpha, y_max(design));
    let a2 = alpha * alpha;
    let (mut d1, mut d2) = (0.0, 0.0);
    for (&e, &y) in eta.iter().zip(&design.response) {
        let mu = e.exp();
        let yi = y as usize;
        let yf = y as f64;
        let one_am = 1.0 + alpha * mu;
        let l = (alpha * mu).ln_1p();
        d1 += l / a2 - tables.inv_terms[yi] / alpha + (yf - mu) / (alpha * one_am);
        d2 += mu / (a2 * one_am) - 2.0 * l / (a2 * alpha) + tables.curv_terms[yi] / a2
            - (yf - mu) * (1.0 + 2.0 * alpha * mu) / (a2 * one_am * one_am);
    }
    (loglik_from_eta(eta, alpha, design, &tables), d1, d2)
}

/// Analytic `∂ℓ/∂α` of the NB2 log-likelihood.
pub fn nb_alpha_score(beta: &[f64], alpha: f64, design: &DesignMatrix) -> f64 {
    alpha_derivatives(&linear_predictors(design, beta), alpha, design).1
}

/// Method-of-moments start `max(1e-6, (s² − ȳ)/ȳ²)` with the unbiased
/// sample variance.
pub fn moment_alpha(y: &[u64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 1e-6;
    }
    let mean = y.iter().sum::<u64>() as f64 / n;
    if mean <= 0.0 {
        return 1e-6;
    }
    let var = y.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    ((var - mean) / (mean * mean)).max(1e-6)
}

/// Safeguarded Newton on `θ = ln α` for fixed linear predictors. Returns
/// the new α.
fn optimize_alpha(eta: &[f64], alpha0: f64, design: &DesignMatrix, options: &FitOptions) -> f64 {
    let (lo, hi) = (options.alpha_min.ln(), options.alpha_max.ln());
    let mut theta = alpha0.ln().clamp(lo, hi);
    let loglik = |t: f64| {
        let a = t.exp();
        let tables = CountTables::new(a, y_max(design));
        loglik_from_eta(eta, a, design, &tables)
    };
    for _ in 0..100 {
        let alpha = theta.exp();
        let (ll, d1, d2) = alpha_derivatives(eta, alpha, design);
        let grad = alpha * d1;
        let hess = alpha * alpha * d2 + alpha * d1;
        let mut step = if hess < 0.0 { -grad / hess } else { grad.signum() };
        step = step.clamp(-3.0, 3.0);
        let mut next = (theta + step).clamp(lo, hi);
        if next == theta {
            break;
        }
        let mut next_ll = loglik(next);
        let mut tries = 0;
        while !(next_ll >= ll) && tries < 40 {
            step *= 0.5;
            next = (theta + step).clamp(lo, hi);
            next_ll = loglik(next);
            tries += 1;
        }
        if !(next_ll >= ll) {
            break;
        }
        let moved = (next - theta).abs();
        theta = next;
        if moved < 1e-10 {
            break;
        }
    }
    theta.exp()
}

/// NB2 regression by alternating IRLS for β (weights `μ/(1+αμ)`) and a
/// one-dimensional Newton search for α, started from the Poisson fit and
/// the moment estimate of α.
pub fn fit_negbin(design: &DesignMatrix, options: &FitOptions) -> Result<FittedGlm> {
    let poisson = fit_poisson(design, options)?;
    let mut beta = poisson.beta;
    let mut alpha = moment_alpha(&design.response).clamp(options.alpha_min, options.alpha_max);
    let mut ll = nb_log_likelihood(&beta, alpha, design);
    let mut total_iterations = poisson.iterations;
    let mut rank = poisson.rank;
    let mut converged = false;
    let mut last_change = f64::INFINITY;

    for _ in 0..options.max_outer_iterations {
        let current_alpha = alpha;
        let objective = |b: &[f64]| nb_log_likelihood(b, current_alpha, design);
        let inner = irls(design, Start::Beta(&beta), alpha, &objective, options)
            .map_err(|e| rename_singular(e, design))?;
        total_iterations += inner.iterations;
        rank = inner.rank;
        if !inner.converged {
            return Err(Error::NonConvergence {
                family: "negbin2",
                iterations: total_iterations,
                last_change: inner.last_change,
                last_beta: inner.beta,
            });
        }
        beta = inner.beta;
        let eta = linear_predictors(design, &beta);
        alpha = optimize_alpha(&eta, alpha, design, options);
        let next_ll = nb_log_likelihood(&beta, alpha, design);
        last_change = (next_ll - ll).abs() / ll.abs().max(1.0);
        ll = next_ll;
        if last_change <= options.joint_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            family: "negbin2",
            iterations: total_iterations,
            last_change,
            last_beta: beta,
        });
    }

    // settle β at the final α so the score condition holds exactly there
    let final_alpha = alpha;
    let objective = |b: &[f64]| nb_log_likelihood(b, final_alpha, design);
    let polish = irls(design, Start::Beta(&beta), alpha, &objective, options)?;
    total_iterations += polish.iterations;
    if polish.converged {
        beta = polish.beta;
        ll = polish.log_likelihood;
    }

    let mut warnings = Vec::new();
    if alpha <= options.alpha_min * (1.0 + 1e-6) {
        warnings.push("dispersion pinned at its lower bound: data consistent with Poisson".into());
    }
    if rank < design.cols {
        warnings.push(non_identifiable_warning(rank, design.cols));
    }
    let cov_beta = covariance(design, &beta, alpha, options.solve_mode)?;
    Ok(FittedGlm {
        family: Family::NegBinomial2,
        schema: None,
        column_names: design.column_names.clone(),
        beta,
        alpha,
        cov_beta,
        log_likelihood: ll,
        n_obs: design.rows,
        converged: true,
        iterations: total_iterations,
        rank,
        warnings,
    })
}
