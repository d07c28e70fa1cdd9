//! Run configuration: defaults, an optional JSON file, then flags.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use crashrisk::features::{Coding, FeatureSchema, PrecipMode, SplitMethod};
use crashrisk::forest::{ForestParams, SweepConfig};
use crashrisk::ingest::{CrashColumns, DateRange, WeatherColumns};
use crashrisk::pipeline::{FamilyChoice, ForestRun, GlmRun};
use crashrisk::rng::DEFAULT_SEED;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub crash: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub crash_columns: CrashColumns,
    pub weather_columns: WeatherColumns,
    pub coding: Coding,
    pub precip: PrecipMode,
    pub split_frac: f64,
    pub split: SplitMethod,
    pub seed: u64,
    pub family: FamilyChoice,
    /// Forest size when no sweep is given.
    pub trees: Option<usize>,
    pub sweep: Option<Vec<usize>>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bind: String,
    pub static_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let range = DateRange::default();
        RunConfig {
            crash: None,
            weather: None,
            grid: None,
            model: None,
            out: None,
            from: range.start,
            to: range.end,
            crash_columns: CrashColumns::default(),
            weather_columns: WeatherColumns::default(),
            coding: Coding::ReferenceCell,
            precip: PrecipMode::Indicator,
            split_frac: 0.2,
            split: SplitMethod::Random,
            seed: DEFAULT_SEED,
            family: FamilyChoice::Auto,
            trees: None,
            sweep: None,
            max_depth: None,
            min_samples_leaf: 1,
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Checks everything that does not need the filesystem.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.from > self.to {
            return Err(CliError::Usage(format!("--from {} is after --to {}", self.from, self.to)));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(CliError::Usage(format!(
                "--split-frac must be in (0, 1), got {}",
                self.split_frac
            )));
        }
        if self.trees == Some(0) {
            return Err(CliError::Usage("--trees must be positive".into()));
        }
        if let Some(sizes) = &self.sweep {
            if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Usage(format!(
                    "--sweep sizes must be positive and strictly ascending, got {sizes:?}"
                )));
            }
        }
        if self.min_samples_leaf == 0 {
            return Err(CliError::Usage("min_samples_leaf must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(CliError::Usage("max_depth must be positive".into()));
        }
        if !self.bind.contains(':') {
            return Err(CliError::Usage(format!("--bind expects HOST:PORT, got {}", self.bind)));
        }
        Ok(())
    }

    pub fn range(&self) -> Result<DateRange, CliError> {
        DateRange::new(self.from, self.to).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema {
            coding: self.coding,
            precip_mode: self.precip,
            ..FeatureSchema::default()
        }
    }

    pub fn glm_run(&self) -> GlmRun {
        GlmRun {
            schema: self.schema(),
            test_fraction: self.split_frac,
            split: self.split,
            seed: self.seed,
            family: self.family,
        }
    }

    pub fn forest_run(&self) -> ForestRun {
        let sizes = match (&self.sweep, self.trees) {
            (Some(s), _) => s.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => SweepConfig::default().sizes,
        };
        ForestRun {
            schema: self.schema(),
            sweep: SweepConfig {
                sizes,
                test_fraction: self.split_frac,
                split: self.split,
                params: ForestParams {
                    max_depth: self.max_depth,
                    min_samples_leaf: self.min_samples_leaf,
                    ..ForestParams::default()
                },
            },
            seed: self.seed,
        }
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        value
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{flag} is required for this command")))
    }
}
