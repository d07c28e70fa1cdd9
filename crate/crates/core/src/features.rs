//! Dummy encoding of hourly observations and train/test splitting.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{HourlyObservation, Weekday, MONTH_CODES};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    /// Intercept plus one dummy per non-reference level.
    ReferenceCell,
    /// One dummy per level and no intercept. Rank deficient by construction.
    FullDummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecipMode {
    Indicator,
    Inches,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Intercept,
    Hour,
    Weekday,
    Month,
    Precipitation,
}

/// One level of a categorical (or the intercept / precipitation column) and
/// where it lives in the design, if anywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub category: Category,
    pub label: String,
    /// Hour 0-23, weekday index 0-6 or month 1-12; 0 for intercept/precip.
    pub value: u8,
    /// `None` for the dropped reference level under reference-cell coding.
    pub column: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub coding: Coding,
    pub include_precip: bool,
    pub precip_mode: PrecipMode,
    pub reference_hour: u8,
    pub reference_weekday: Weekday,
    pub reference_month: u8,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema {
            coding: Coding::ReferenceCell,
            include_precip: true,
            precip_mode: PrecipMode::Indicator,
            reference_hour: 0,
            reference_weekday: Weekday::Monday,
            reference_month: 1,
        }
    }
}

pub fn hour_label(hour: u8) -> String {
    format!("Hour_{hour}")
}

impl FeatureSchema {
    pub fn reference_cell() -> Self {
        Self::default()
    }

    pub fn full_dummy() -> Self {
        FeatureSchema {
            coding: Coding::FullDummy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference_hour > 23 || !(1..=12).contains(&self.reference_month) {
            return Err(Error::InvalidArgument(format!(
                "invalid reference levels hour={} month={}",
                self.reference_hour, self.reference_month
            )));
        }
        Ok(())
    }

    /// All levels in column order, reference levels included with
    /// `column: None`.
    pub fn levels(&self) -> Vec<Level> {
        let full = self.coding == Coding::FullDummy;
        let mut levels = Vec::with_capacity(46);
        let mut next = 0usize;
        let mut take = |keep: bool| {
            keep.then(|| {
                next += 1;
                next - 1
            })
        };
        if !full {
            levels.push(Level {
                category: Category::Intercept,
                label: "Intercept".into(),
                value: 0,
                column: take(true),
            });
        }
        for h in 0..24u8 {
            levels.push(Level {
                category: Category::Hour,
                label: hour_label(h),
                value: h,
                column: take(full || h != self.reference_hour),
            });
        }
        for d in Weekday::ALL {
            levels.push(Level {
                category: Category::Weekday,
                label: d.code().into(),
                value: d.index() as u8,
                column: take(full || d != self.reference_weekday),
            });
        }
        for (i, code) in MONTH_CODES.iter().enumerate() {
            let m = i as u8 + 1;
            levels.push(Level {
                category: Category::Month,
                label: (*code).into(),
                value: m,
                column: take(full || m != self.reference_month),
            });
        }
        if self.include_precip {
            levels.push(Level {
                category: Category::Precipitation,
                label: "Precipitation".into(),
                value: 0,
                column: take(true),
            });
        }
        levels
    }

    pub fn column_names(&self) -> Vec<String> {
        self.levels()
            .into_iter()
            .filter(|l| l.column.is_some())
            .map(|l| l.label)
            .collect()
    }

    pub fn n_columns(&self) -> usize {
        let base = match self.coding {
            Coding::ReferenceCell => 1 + 23 + 6 + 11,
            Coding::FullDummy => 24 + 7 + 12,
        };
        base + usize::from(self.include_precip)
    }

    /// Number of linearly independent columns.
    pub fn rank(&self) -> usize {
        match self.coding {
            Coding::ReferenceCell => self.n_columns(),
            Coding::FullDummy => self.n_columns() - 2,
        }
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        match self.coding {
            Coding::ReferenceCell => (1, 24, 30, 41),
            Coding::FullDummy => (0, 24, 31, 43),
        }
    }

    pub fn precip_value(&self, obs: &HourlyObservation) -> f64 {
        match self.precip_mode {
            PrecipMode::Indicator => f64::from(obs.precip_indicator),
            PrecipMode::Inches => obs.precip_in,
        }
    }

    /// Encodes a slot directly. `precip` is the value placed in the
    /// precipitation column (indicator or inches, per `precip_mode`).
    pub fn encode_parts(&self, hour: u8, weekday: Weekday, month: u8, precip: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.n_columns()];
        self.encode_into(hour, weekday, month, precip, &mut row);
        row
    }

    fn encode_into(&self, hour: u8, weekday: Weekday, month: u8, precip: f64, row: &mut [f64]) {
        let (h0, d0, m0, p0) = self.offsets();
        match self.coding {
            Coding::FullDummy => {
                row[h0 + hour as usize] = 1.0;
                row[d0 + weekday.index()] = 1.0;
                row[m0 + month as usize - 1] = 1.0;
            }
            Coding::ReferenceCell => {
                row[0] = 1.0;
                let skip = |value: usize, reference: usize| {
                    (value != reference).then(|| value - usize::from(value > reference))
                };
                if let Some(k) = skip(hour as usize, self.reference_hour as usize) {
                    row[h0 + k] = 1.0;
                }
                if let Some(k) = skip(weekday.index(), self.reference_weekday.index()) {
                    row[d0 + k] = 1.0;
                }
                if let Some(k) = skip(month as usize - 1, self.reference_month as usize - 1) {
                    row[m0 + k] = 1.0;
                }
            }
        }
        if self.include_precip {
            row[p0] = precip;
        }
    }

    pub fn encode(&self, obs: &HourlyObservation) -> Vec<f64> {
        self.encode_parts(obs.hour, obs.weekday, obs.month, self.precip_value(obs))
    }
}

/// Dense row-major design matrix with a count response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub column_names: Vec<String>,
    pub response: Vec<u64>,
}

impl DesignMatrix {
    pub fn new(
        cols: usize,
        values: Vec<f64>,
        column_names: Vec<String>,
        response: Vec<u64>,
    ) -> Result<Self> {
        let rows = response.len();
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if column_names.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                actual: column_names.len(),
            });
        }
        Ok(DesignMatrix {
            rows,
            cols,
            values,
            column_names,
            response,
        })
    }

    /// Convenience constructor from row vectors; columns are named `x0..`.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<u64>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.len() != response.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: response.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                actual: bad.len(),
            });
        }
        let values = rows.concat();
        let names = (0..cols).map(|j| format!("x{j}")).collect();
        Self::new(cols, values, names, response)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn response_f64(&self) -> Vec<f64> {
        self.response.iter().map(|&y| y as f64).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> DesignMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        let mut response = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            response.push(self.response[i]);
        }
        DesignMatrix {
            rows: indices.len(),
            cols: self.cols,
            values,
            column_names: self.column_names.clone(),
            response,
        }
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = self.column_names.clone();
        header.push("response".into());
        writer.write_record(&header)?;
        for i in 0..self.rows {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.response[i].to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

pub fn build_design(observations: &[HourlyObservation], schema: &FeatureSchema) -> Result<DesignMatrix> {
    if observations.is_empty() {
        return Err(Error::EmptyInput("no observations to encode".into()));
    }
    schema.validate()?;
    let p = schema.n_columns();
    let mut values = vec![0.0; observations.len() * p];
    for (obs, row) in observations.iter().zip(values.chunks_exact_mut(p)) {
        schema.encode_into(obs.hour, obs.weekday, obs.month, schema.precip_value(obs), row);
    }
    DesignMatrix::new(
        p,
        values,
        schema.column_names(),
        observations.iter().map(|o| u64::from(o.crash_count)).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    #[default]
    Random,
    /// Last rows (in input order) become the test set.
    Chronological,
}

/// Returns `(train, test)` row indices. Deterministic in `(n, fraction, seed)`.
pub fn split_indices(
    n: usize,
    test_fraction: f64,
    seed: u64,
    method: SplitMethod,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    if method == SplitMethod::Random {
        let mut rng = rng::substream(seed, "split", 0);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }
    let test = order.split_off(n - n_test);
    Ok((order, test))
}

pub fn split(
    matrix: &DesignMatrix,
    test_fraction: f64,
    seed: u64,
    method: SplitMethod,
) -> Result<(DesignMatrix, DesignMatrix)> {
    let (train, test) = split_indices(matrix.rows, test_fraction, seed, method)?;
    Ok((matrix.select_rows(&train), matrix.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn obs(hour: u8, weekday: Weekday, month: u8, precip: u8) -> HourlyObservation {
        HourlyObservation {
            date: NaiveDate::from_ymd_opt(2016, month as u32, 1).unwrap(),
            hour,
            weekday,
            month,
            crash_count: 3,
            precip_indicator: precip,
            precip_in: f64::from(precip) * 0.4,
        }
    }

    #[test]
    fn column_counts() {
        assert_eq!(FeatureSchema::reference_cell().n_columns(), 42);
        assert_eq!(FeatureSchema::full_dummy().n_columns(), 44);
        let no_precip = FeatureSchema {
            include_precip: false,
            ..FeatureSchema::reference_cell()
        };
        assert_eq!(no_precip.n_columns(), 41);
        for schema in [FeatureSchema::reference_cell(), FeatureSchema::full_dummy(), no_precip] {
            assert_eq!(schema.column_names().len(), schema.n_columns());
        }
    }

    #[test]
    fn reference_cell_row_is_intercept_only() {
        let row = FeatureSchema::reference_cell().encode(&obs(0, Weekday::Monday, 1, 0));
        assert_eq!(row[0], 1.0);
        assert!(row[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_dummy_one_hot() {
        let schema = FeatureSchema::full_dummy();
        let names = schema.column_names();
        let row = schema.encode(&obs(8, Weekday::Friday, 6, 1));
        let hot: Vec<&str> = names
            .iter()
            .zip(&row)
            .filter(|(_, &v)| v == 1.0)
            .map(|(n, _)| n.as_str())
            .collect();
        assert_eq!(hot, vec!["Hour_8", "FR", "JUN", "Precipitation"]);
    }

    #[test]
    fn inches_mode_carries_amount() {
        let schema = FeatureSchema {
            precip_mode: PrecipMode::Inches,
            ..FeatureSchema::reference_cell()
        };
        let row = schema.encode(&obs(3, Weekday::Monday, 2, 1));
        assert_eq!(*row.last().unwrap(), 0.4);
    }

    #[test]
    fn build_design_single_row_matches_encode() {
        let schema = FeatureSchema::reference_cell();
        let o = obs(5, Weekday::Sunday, 12, 1);
        let m = build_design(std::slice::from_ref(&o), &schema).unwrap();
        assert_eq!((m.rows, m.cols), (1, 42));
        assert_eq!(m.row(0), schema.encode(&o).as_slice());
        assert_eq!(m.response, vec![3]);
    }

    #[test]
    fn build_design_rejects_empty() {
        assert!(matches!(
            build_design(&[], &FeatureSchema::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (train, test) = split_indices(10, 0.2, 1, SplitMethod::Random).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.2, 1, SplitMethod::Random).unwrap(), (train, test));

        let (train, test) = split_indices(100, 0.25, 9, SplitMethod::Random).unwrap();
        assert_eq!((train.len(), test.len()), (75, 25));
    }

    #[test]
    fn chronological_split_takes_tail() {
        let (train, test) = split_indices(5, 0.4, 0, SplitMethod::Chronological).unwrap();
        assert_eq!(train, vec![0, 1, 2]);
        assert_eq!(test, vec![3, 4]);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(split_indices(10, f, 0, SplitMethod::Random).is_err());
        }
        assert!(split_indices(1, 0.5, 0, SplitMethod::Random).is_err());
    }

    fn weekday_strategy() -> impl Strategy<Value = Weekday> {
        (0usize..7).prop_map(|i| Weekday::from_index(i).unwrap())
    }

    proptest! {
        #[test]
        fn full_dummy_partition_and_round_trip(
            hour in 0u8..24, weekday in weekday_strategy(), month in 1u8..=12, precip in 0u8..=1
        ) {
            let schema = FeatureSchema::full_dummy();
            let row = schema.encode(&obs(hour, weekday, month, precip));
            prop_assert_eq!(row[0..24].iter().sum::<f64>(), 1.0);
            prop_assert_eq!(row[24..31].iter().sum::<f64>(), 1.0);
            prop_assert_eq!(row[31..43].iter().sum::<f64>(), 1.0);
            let argmax = |s: &[f64]| s.iter().position(|&v| v == 1.0).unwrap();
            prop_assert_eq!(argmax(&row[0..24]), hour as usize);
            prop_assert_eq!(argmax(&row[24..31]), weekday.index());
            prop_assert_eq!(argmax(&row[31..43]) + 1, month as usize);
            prop_assert_eq!(row[43], f64::from(precip));
        }

        #[test]
        fn reference_cell_at_most_one_per_category(
            hour in 0u8..24, weekday in weekday_strategy(), month in 1u8..=12
        ) {
            let schema = FeatureSchema::reference_cell();
            let row = schema.encode(&obs(hour, weekday, month, 0));
            prop_assert_eq!(row[0], 1.0);
            prop_assert_eq!(row[1..24].iter().sum::<f64>(), f64::from(u8::from(hour != 0)));
            prop_assert_eq!(row[24..30].iter().sum::<f64>(), f64::from(u8::from(weekday != Weekday::Monday)));
            prop_assert_eq!(row[30..41].iter().sum::<f64>(), f64::from(u8::from(month != 1)));
        }

        #[test]
        fn split_is_exact_partition(n in 2usize..400, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let (train, test) = split_indices(n, frac, seed, SplitMethod::Random).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            let mut seen = vec![false; n];
            for &i in train.iter().chain(&test) {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
            prop_assert_eq!(split_indices(n, frac, seed, SplitMethod::Random).unwrap(), (train, test));
        }
    }
}
