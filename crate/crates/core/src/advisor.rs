//! Coefficient summaries and commute-slot ranking.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::features::{Category, FeatureSchema, PrecipMode};
use crate::forest::{predict_forest, ForestModel};
use crate::glm::{percent_change, predict_mean, wald_inference, FittedGlm};
use crate::ingest::{HourlyObservation, Weekday};
use crate::{Error, Result};

/// Shown next to every ranking.
pub const RANKING_CAVEAT: &str = "Expected crash counts are not normalized by traffic volume: \
a quiet slot can look safe simply because few people travel then.";

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Crash totals per level over an observation grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTotals {
    pub hour: Vec<u64>,
    pub weekday: Vec<u64>,
    pub month: Vec<u64>,
    /// Crashes in hours with precipitation.
    pub precip: u64,
    pub total: u64,
}

impl LevelTotals {
    pub fn from_grid(grid: &[HourlyObservation]) -> Result<Self> {
        let mut totals = LevelTotals {
            hour: vec![0; 24],
            weekday: vec![0; 7],
            month: vec![0; 12],
            precip: 0,
            total: 0,
        };
        for obs in grid {
            if obs.hour > 23 || !(1..=12).contains(&obs.month) {
                return Err(Error::SchemaMismatch(format!(
                    "observation {} hour {} month {} outside the schema levels",
                    obs.date, obs.hour, obs.month
                )));
            }
            let c = u64::from(obs.crash_count);
            totals.hour[obs.hour as usize] += c;
            totals.weekday[obs.weekday.index()] += c;
            totals.month[obs.month as usize - 1] += c;
            if obs.precip_indicator == 1 {
                totals.precip += c;
            }
            totals.total += c;
        }
        Ok(totals)
    }

    fn for_level(&self, category: Category, value: u8) -> u64 {
        match category {
            Category::Intercept => self.total,
            Category::Hour => self.hour[value as usize],
            Category::Weekday => self.weekday[value as usize],
            Category::Month => self.month[value as usize - 1],
            Category::Precipitation => self.precip,
        }
    }
}

/// One line of the coefficient table. Wald columns are `None` for
/// reference levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub category: Category,
    pub coefficient: f64,
    pub exp_coef: f64,
    pub percent_change: f64,
    pub std_err: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub reference: bool,
    pub crash_total: u64,
    pub crash_share: f64,
}

fn category_rank(category: Category) -> u8 {
    match category {
        Category::Intercept => 0,
        Category::Hour => 1,
        Category::Precipitation => 2,
        Category::Weekday => 3,
        Category::Month => 4,
    }
}

fn model_schema(model: &FittedGlm) -> Result<&FeatureSchema> {
    let schema = model
        .schema
        .as_ref()
        .ok_or_else(|| Error::SchemaMismatch("model carries no feature schema".into()))?;
    if schema.column_names() != model.column_names {
        return Err(Error::SchemaMismatch(
            "model columns do not match its feature schema".into(),
        ));
    }
    Ok(schema)
}

pub fn summarize(model: &FittedGlm, grid: &[HourlyObservation]) -> Result<Vec<CoefficientRow>> {
    summarize_with_totals(model, &LevelTotals::from_grid(grid)?)
}

/// Table rows ordered intercept, hours, precipitation, weekdays, months.
pub fn summarize_with_totals(model: &FittedGlm, totals: &LevelTotals) -> Result<Vec<CoefficientRow>> {
    let schema = model_schema(model)?;
    if totals.hour.len() != 24 || totals.weekday.len() != 7 || totals.month.len() != 12 {
        return Err(Error::SchemaMismatch("level totals have the wrong shape".into()));
    }
    let wald = wald_inference(model);
    let mut levels = schema.levels();
    levels.sort_by_key(|l| category_rank(l.category));
    let share = |count: u64| {
        if totals.total == 0 {
            0.0
        } else {
            count as f64 / totals.total as f64
        }
    };
    Ok(levels
        .into_iter()
        .map(|level| {
            let crash_total = totals.for_level(level.category, level.value);
            match level.column {
                Some(j) => {
                    let w = wald[j];
                    CoefficientRow {
                        name: level.label,
                        category: level.category,
                        coefficient: model.beta[j],
                        exp_coef: model.beta[j].exp(),
                        percent_change: percent_change(model.beta[j]),
                        std_err: Some(w.std_err),
                        z: Some(w.z),
                        p_value: Some(w.p_value),
                        significant: !w.degenerate && w.p_value < SIGNIFICANCE_LEVEL,
                        reference: false,
                        crash_total,
                        crash_share: share(crash_total),
                    }
                }
                None => CoefficientRow {
                    name: level.label,
                    category: level.category,
                    coefficient: 0.0,
                    exp_coef: 1.0,
                    percent_change: 0.0,
                    std_err: None,
                    z: None,
                    p_value: None,
                    significant: false,
                    reference: true,
                    crash_total,
                    crash_share: share(crash_total),
                },
            }
        })
        .collect())
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "name",
    "coefficient",
    "exp_coef",
    "percent_change",
    "std_err",
    "z",
    "p_value",
    "crash_total",
    "crash_share",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_summary_csv<W: Write>(rows: &[CoefficientRow], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(SUMMARY_HEADER)?;
    for row in rows {
        writer.write_record([
            row.name.clone(),
            row.coefficient.to_string(),
            row.exp_coef.to_string(),
            row.percent_change.to_string(),
            opt(row.std_err),
            opt(row.z),
            opt(row.p_value),
            row.crash_total.to_string(),
            row.crash_share.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-category coefficient series (one plot's data).
pub fn write_category_csv<W: Write>(rows: &[CoefficientRow], category: Category, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["level", "coefficient", "percent_change", "p_value", "reference"])?;
    for row in rows.iter().filter(|r| r.category == category) {
        writer.write_record([
            row.name.clone(),
            row.coefficient.to_string(),
            row.percent_change.to_string(),
            opt(row.p_value),
            row.reference.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub weekday: Weekday,
    pub hour: u8,
    pub month: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotQuery {
    pub slots: Vec<Slot>,
    /// 0/1 under an indicator schema, inches otherwise.
    pub precip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedSlot {
    pub slot: Slot,
    pub expected_count: f64,
    pub rank: usize,
    pub relative_risk: f64,
}

/// Anything that maps an encoded slot to an expected count.
pub trait SlotModel {
    fn schema(&self) -> Result<&FeatureSchema>;
    fn expected(&self, x: &[f64]) -> Result<f64>;
}

impl SlotModel for FittedGlm {
    fn schema(&self) -> Result<&FeatureSchema> {
        model_schema(self)
    }

    fn expected(&self, x: &[f64]) -> Result<f64> {
        predict_mean(self, x)
    }
}

impl SlotModel for ForestModel {
    fn schema(&self) -> Result<&FeatureSchema> {
        self.schema
            .as_ref()
            .ok_or_else(|| Error::SchemaMismatch("forest carries no feature schema".into()))
    }

    fn expected(&self, x: &[f64]) -> Result<f64> {
        predict_forest(self, x)
    }
}

pub fn validate_precip(schema: &FeatureSchema, precip: f64) -> Result<()> {
    let ok = match schema.precip_mode {
        PrecipMode::Indicator => precip == 0.0 || precip == 1.0,
        PrecipMode::Inches => precip.is_finite() && precip >= 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "precip must be {} for this model, got {precip}",
            match schema.precip_mode {
                PrecipMode::Indicator => "0 or 1",
                PrecipMode::Inches => "a non-negative number of inches",
            }
        )))
    }
}

pub fn validate_slot(slot: &Slot) -> Result<()> {
    if slot.hour > 23 {
        return Err(Error::InvalidArgument(format!("hour {} outside 0-23", slot.hour)));
    }
    if !(1..=12).contains(&slot.month) {
        return Err(Error::InvalidArgument(format!("month {} outside 1-12", slot.month)));
    }
    Ok(())
}

/// Sorts the candidate slots from safest to riskiest. Ties go to the
/// earlier hour, then weekday, then month.
pub fn rank_slots<M: SlotModel + ?Sized>(model: &M, query: &SlotQuery) -> Result<Vec<RankedSlot>> {
    if query.slots.is_empty() {
        return Err(Error::InvalidArgument("no candidate slots".into()));
    }
    let schema = model.schema()?;
    validate_precip(schema, query.precip)?;
    let mut scored = query
        .slots
        .iter()
        .map(|slot| {
            validate_slot(slot)?;
            let x = schema.encode_parts(slot.hour, slot.weekday, slot.month, query.precip);
            Ok((*slot, model.expected(&x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|(a, ea), (b, eb)| {
        ea.total_cmp(eb)
            .then(a.hour.cmp(&b.hour))
            .then(a.weekday.cmp(&b.weekday))
            .then(a.month.cmp(&b.month))
    });
    let min = scored[0].1;
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (slot, expected_count))| RankedSlot {
            slot,
            expected_count,
            rank: i + 1,
            relative_risk: if min > 0.0 { expected_count / min } else { f64::NAN },
        })
        .collect())
}

/// Expected counts for every weekday × hour of one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub month: u8,
    pub precip: f64,
    /// `cells[weekday][hour]`.
    pub cells: Vec<Vec<f64>>,
    pub min: f64,
    pub max: f64,
}

pub fn heatmap<M: SlotModel + ?Sized>(model: &M, month: u8, precip: f64) -> Result<Heatmap> {
    let schema = model.schema()?;
    validate_precip(schema, precip)?;
    validate_slot(&Slot {
        weekday: Weekday::Monday,
        hour: 0,
        month,
    })?;
    let cells = Weekday::ALL
        .iter()
        .map(|&d| {
            (0..24u8)
                .map(|h| model.expected(&schema.encode_parts(h, d, month, precip)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let flat = cells.iter().flatten();
    let min = flat.clone().copied().fold(f64::INFINITY, f64::min);
    let max = flat.copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Heatmap {
        month,
        precip,
        cells,
        min,
        max,
    })
}
