//! End-to-end fitting runs shared by the CLI and the test suites.

use serde::{Deserialize, Serialize};

use crate::advisor::{summarize_with_totals, CoefficientRow, LevelTotals};
use crate::artifact::{fingerprint_grid, ForestArtifact, ForestDiagnostics, GlmArtifact, GlmDiagnostics};
use crate::features::{build_design, split, FeatureSchema, SplitMethod};
use crate::forest::{estimator_sweep, SweepConfig, SweepRow};
use crate::glm::{
    dispersion_check, fit_negbin, fit_poisson, rmse, DispersionReport, Family, FitOptions, FittedGlm,
};
use crate::ingest::HourlyObservation;
use crate::rng::DEFAULT_SEED;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    /// Poisson unless the dispersion check flags overdispersion.
    #[default]
    Auto,
    Poisson,
    Negbin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmRun {
    pub schema: FeatureSchema,
    pub test_fraction: f64,
    pub split: SplitMethod,
    pub seed: u64,
    pub family: FamilyChoice,
}

impl Default for GlmRun {
    fn default() -> Self {
        GlmRun {
            schema: FeatureSchema::default(),
            test_fraction: 0.2,
            split: SplitMethod::Random,
            seed: DEFAULT_SEED,
            family: FamilyChoice::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlmOutcome {
    pub artifact: GlmArtifact,
    pub poisson: FittedGlm,
    pub dispersion: DispersionReport,
    pub summary: Vec<CoefficientRow>,
}

/// Encode, split, fit Poisson, test dispersion, escalate to NB2 when asked
/// or warranted, and score on the held-out rows.
pub fn run_glm(grid: &[HourlyObservation], run: &GlmRun) -> Result<GlmOutcome> {
    let design = build_design(grid, &run.schema)?;
    let (train, test) = split(&design, run.test_fraction, run.seed, run.split)?;
    let options = FitOptions::for_schema(&run.schema);
    let poisson = fit_poisson(&train, &options)?.with_schema(run.schema.clone());
    let dispersion = dispersion_check(&poisson, &train)?;
    let use_nb = match run.family {
        FamilyChoice::Auto => dispersion.overdispersed,
        FamilyChoice::Poisson => false,
        FamilyChoice::Negbin => true,
    };
    let model = if use_nb {
        fit_negbin(&train, &options)?.with_schema(run.schema.clone())
    } else {
        poisson.clone()
    };
    let totals = LevelTotals::from_grid(grid)?;
    let summary = summarize_with_totals(&model, &totals)?;
    let diagnostics = GlmDiagnostics {
        dispersion: Some(dispersion),
        level_totals: Some(totals),
        test_rmse: Some(rmse(&model, &test)?),
        n_train: train.rows,
        n_test: test.rows,
        poisson_log_likelihood: (model.family == Family::NegBinomial2).then_some(poisson.log_likelihood),
    };
    Ok(GlmOutcome {
        artifact: GlmArtifact {
            model,
            diagnostics,
            fit_options: options,
            data_fingerprint: fingerprint_grid(grid)?,
        },
        poisson,
        dispersion,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRun {
    pub schema: FeatureSchema,
    pub sweep: SweepConfig,
    pub seed: u64,
}

impl Default for ForestRun {
    fn default() -> Self {
        ForestRun {
            schema: FeatureSchema::default(),
            sweep: SweepConfig::default(),
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestOutcome {
    pub artifact: ForestArtifact,
    pub sweep: Vec<SweepRow>,
}

/// Estimator sweep on one split; the artifact holds the largest forest.
pub fn run_forest(grid: &[HourlyObservation], run: &ForestRun) -> Result<ForestOutcome> {
    let design = build_design(grid, &run.schema)?;
    let (sweep, largest) = estimator_sweep(&design, &run.sweep, run.seed)?;
    let n_train = largest.n_train;
    Ok(ForestOutcome {
        artifact: ForestArtifact {
            model: largest.with_schema(run.schema.clone()),
            diagnostics: ForestDiagnostics {
                sweep: sweep.clone(),
                n_train,
                n_test: design.rows - n_train,
            },
            data_fingerprint: fingerprint_grid(grid)?,
        },
        sweep,
    })
}
