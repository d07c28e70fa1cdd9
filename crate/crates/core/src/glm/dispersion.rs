use serde::{Deserialize, Serialize};

use crate::features::DesignMatrix;
use crate::numerics::normal_cdf;
use crate::{Error, Result};

use super::{predict_all, Family, FittedGlm};

/// Pearson χ²/dof above this flags overdispersion regardless of the
/// auxiliary-regression test.
pub const OVERDISPERSION_PEARSON_RATIO: f64 = 1.5;
const CT_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    /// Pearson χ² / (n − rank).
    pub pearson_ratio: f64,
    /// Slope of the Cameron–Trivedi auxiliary regression.
    pub ct_coefficient: f64,
    /// `None` when the auxiliary residuals vanish (zero standard error).
    pub ct_t: Option<f64>,
    /// One-sided p-value for `ct_coefficient > 0`.
    pub ct_p_value: f64,
    pub overdispersed: bool,
}

/// Pearson ratio plus the Cameron–Trivedi regression of
/// `((y−μ̂)² − y)/μ̂` on `μ̂` without intercept, for a Poisson fit.
pub fn dispersion_check(model: &FittedGlm, design: &DesignMatrix) -> Result<DispersionReport> {
    if model.family != Family::Poisson {
        return Err(Error::InvalidArgument(
            "dispersion check expects a Poisson fit".into(),
        ));
    }
    let n = design.rows;
    if n <= model.rank {
        return Err(Error::InvalidArgument(format!(
            "need more observations ({n}) than parameters ({})",
            model.rank
        )));
    }
    let mu = predict_all(model, design)?;
    let y = design.response_f64();

    let pearson: f64 = y.iter().zip(&mu).map(|(y, m)| (y - m) * (y - m) / m).sum();
    let pearson_ratio = pearson / (n - model.rank) as f64;

    let aux: Vec<f64> = y
        .iter()
        .zip(&mu)
        .map(|(y, m)| ((y - m) * (y - m) - y) / m)
        .collect();
    let smm: f64 = mu.iter().map(|m| m * m).sum();
    let szm: f64 = aux.iter().zip(&mu).map(|(z, m)| z * m).sum();
    let slope = szm / smm;
    let rss: f64 = aux
        .iter()
        .zip(&mu)
        .map(|(z, m)| (z - slope * m).powi(2))
        .sum();
    let dof = (n - 1).max(1) as f64;
    let se = (rss / dof / smm).sqrt();
    let (ct_t, ct_p_value) = if se > 0.0 {
        let t = slope / se;
        (Some(t), 1.0 - normal_cdf(t))
    } else if slope > 0.0 {
        (None, 0.0)
    } else {
        (None, 1.0)
    };
    let overdispersed =
        (ct_p_value < CT_LEVEL && slope > 0.0) || pearson_ratio > OVERDISPERSION_PEARSON_RATIO;
    Ok(DispersionReport {
        pearson_ratio,
        ct_coefficient: slope,
        ct_t,
        ct_p_value,
        overdispersed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_poisson, FitOptions};

    fn intercept_design(y: &[u64]) -> DesignMatrix {
        DesignMatrix::from_rows(&vec![vec![1.0]; y.len()], y.to_vec()).unwrap()
    }

    #[test]
    fn hand_computed_pearson_ratio() {
        let d = intercept_design(&[0, 6]);
        let fit = fit_poisson(&d, &FitOptions::default()).unwrap();
        let report = dispersion_check(&fit, &d).unwrap();
        assert!((report.pearson_ratio - 6.0).abs() < 1e-9);
        assert!(report.overdispersed);
    }

    #[test]
    fn zero_residuals() {
        let d = intercept_design(&[3, 3]);
        let fit = fit_poisson(&d, &FitOptions::default()).unwrap();
        let report = dispersion_check(&fit, &d).unwrap();
        assert!(report.pearson_ratio.abs() < 1e-12);
        assert!(!report.overdispersed);
    }

    #[test]
    fn too_few_rows() {
        let d = intercept_design(&[3]);
        let fit = fit_poisson(&d, &FitOptions::default()).unwrap();
        assert!(dispersion_check(&fit, &d).is_err());
    }
}
