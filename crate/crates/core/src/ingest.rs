//! Crash and weather CSV ingestion and the hourly observation grid.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Serialized as its two-letter code; parsed leniently via `FromStr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    pub const ALL: [Weekday; 7] = [
        Weekday::Monday,
        Weekday::Tuesday,
        Weekday::Wednesday,
        Weekday::Thursday,
        Weekday::Friday,
        Weekday::Saturday,
        Weekday::Sunday,
    ];

    /// Zero-based index, Monday = 0.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Weekday> {
        Self::ALL.get(index).copied()
    }

    /// Two-letter code used for column names (`MO` .. `SU`).
    pub fn code(self) -> &'static str {
        ["MO", "TU", "WE", "TH", "FR", "SA", "SU"][self.index()]
    }

    pub fn name(self) -> &'static str {
        [
            "Monday",
            "Tuesday",
            "Wednesday",
            "Thursday",
            "Friday",
            "Saturday",
            "Sunday",
        ][self.index()]
    }

    fn from_chrono(day: chrono::Weekday) -> Weekday {
        Self::ALL[day.num_days_from_monday() as usize]
    }
}

impl fmt::Display for Weekday {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Weekday {
    type Err = Error;

    /// Accepts two-letter codes, three-letter abbreviations and full names,
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Weekday::ALL
            .iter()
            .copied()
            .find(|d| {
                let name = d.name().to_ascii_lowercase();
                lower == d.code().to_ascii_lowercase() || lower == name || lower == name[..3]
            })
            .ok_or_else(|| Error::InvalidArgument(format!("unknown weekday `{s}`")))
    }
}

impl From<Weekday> for String {
    fn from(day: Weekday) -> String {
        day.code().to_string()
    }
}

impl TryFrom<String> for Weekday {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

pub const MONTH_CODES: [&str; 12] = [
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC",
];

/// Inclusive range of civil dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidArgument(format!(
                "date range start {start} is after end {end}"
            )));
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d <= end)
    }

    /// Zero-based day offset of `date` from the range start.
    pub fn offset(&self, date: NaiveDate) -> Option<usize> {
        self.contains(date)
            .then(|| (date - self.start).num_days() as usize)
    }
}

impl Default for DateRange {
    fn default() -> Self {
        DateRange {
            start: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2019, 12, 31).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub id: String,
    /// Local civil time, minute precision.
    pub reported_at: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    pub date: NaiveDate,
    pub precipitation_in: f64,
    pub precip_indicator: u8,
    pub conditions: String,
}

/// One (date, hour) cell of the observation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyObservation {
    pub date: NaiveDate,
    pub hour: u8,
    pub weekday: Weekday,
    pub month: u8,
    pub crash_count: u32,
    pub precip_indicator: u8,
    /// Daily precipitation in inches; the indicator is `precip_in > 0`.
    pub precip_in: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeParts {
    pub date: NaiveDate,
    pub hour: u8,
    pub weekday: Weekday,
    pub month: u8,
}

pub fn derive_time_parts(ts: NaiveDateTime) -> TimeParts {
    let date = ts.date();
    TimeParts {
        date,
        hour: ts.hour() as u8,
        weekday: Weekday::from_chrono(date.weekday()),
        month: date.month() as u8,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashColumns {
    pub id: String,
    pub reported_at: String,
}

impl Default for CrashColumns {
    fn default() -> Self {
        CrashColumns {
            id: "OBJECTID".into(),
            reported_at: "REPORTDATE".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeatherColumns {
    pub date: String,
    pub precipitation: String,
    pub conditions: String,
}

impl Default for WeatherColumns {
    fn default() -> Self {
        WeatherColumns {
            date: "Datetime".into(),
            precipitation: "Precipitation".into(),
            conditions: "Conditions".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashReport {
    pub rows_read: usize,
    pub retained: usize,
    pub duplicate_ids: usize,
    pub bad_timestamps: usize,
    pub empty_ids: usize,
    pub out_of_range: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrashIngest {
    pub records: Vec<CrashRecord>,
    pub report: CrashReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeatherReport {
    pub rows_read: usize,
    pub retained: usize,
    pub duplicate_dates: usize,
    pub missing_precipitation: usize,
    pub out_of_range: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherIngest {
    pub records: Vec<DailyWeather>,
    pub report: WeatherReport,
}

/// Parses a crash or weather timestamp as local civil time, truncated to the
/// minute. Trailing `Z` or numeric UTC offsets are ignored.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 6] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y/%m/%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
        "%Y/%m/%d %H:%M",
    ];
    let mut s = raw.trim();
    if let Some(stripped) = s.strip_suffix('Z') {
        s = stripped;
    }
    // numeric offset such as +00, +00:00 or -0500 after the time part
    if s.len() > 16 {
        if let Some(pos) = s[16..].rfind(['+', '-']) {
            s = &s[..16 + pos];
        }
    }
    let parsed = FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())?;
    parsed.with_second(0)?.with_nanosecond(0)
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    let head = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(head, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(head, "%Y/%m/%d"))
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}

/// Opens a CSV reader, picking tab as the delimiter when the header line
/// contains tabs but no commas.
fn csv_reader<R: Read>(source: R) -> Result<csv::Reader<BufReader<R>>> {
    let mut buffered = BufReader::new(source);
    let head = buffered.fill_buf()?;
    let first_line = head.split(|b| *b == b'\n').next().unwrap_or(&[]);
    let delimiter = if first_line.contains(&b'\t') && !first_line.contains(&b',') {
        b'\t'
    } else {
        b','
    };
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(buffered))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn read_headers<R: Read>(reader: &mut csv::Reader<R>, what: &str) -> Result<csv::StringRecord> {
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::EmptyInput(format!("{what} CSV has no header row")));
    }
    Ok(headers)
}

pub fn parse_crash_csv<R: Read>(
    source: R,
    range: &DateRange,
    columns: &CrashColumns,
) -> Result<CrashIngest> {
    let mut reader = csv_reader(source)?;
    let headers = read_headers(&mut reader, "crash")?;
    let id_col = column_index(&headers, &columns.id)?;
    let ts_col = column_index(&headers, &columns.reported_at)?;

    let mut report = CrashReport::default();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        report.rows_read += 1;
        let id = row.get(id_col).unwrap_or("").trim();
        if id.is_empty() {
            report.empty_ids += 1;
            continue;
        }
        let Some(reported_at) = row.get(ts_col).and_then(parse_timestamp) else {
            report.bad_timestamps += 1;
            continue;
        };
        if !range.contains(reported_at.date()) {
            report.out_of_range += 1;
            continue;
        }
        if !seen.insert(id.to_string()) {
            report.duplicate_ids += 1;
            continue;
        }
        records.push(CrashRecord {
            id: id.to_string(),
            reported_at,
        });
    }
    if report.duplicate_ids > 0 {
        log::warn!("dropped {} duplicate crash ids", report.duplicate_ids);
    }
    if report.bad_timestamps > 0 {
        log::warn!("skipped {} unparseable crash timestamps", report.bad_timestamps);
    }
    report.retained = records.len();
    Ok(CrashIngest { records, report })
}

/// Parses daily weather. Duplicate dates (daylight-saving artifacts) keep the
/// row with the larger precipitation, first occurrence on ties. Every date in
/// `range` must be present.
pub fn parse_weather_csv<R: Read>(
    source: R,
    range: &DateRange,
    columns: &WeatherColumns,
) -> Result<WeatherIngest> {
    let mut reader = csv_reader(source)?;
    let headers = read_headers(&mut reader, "weather")?;
    let date_col = column_index(&headers, &columns.date)?;
    let precip_col = column_index(&headers, &columns.precipitation)?;
    let cond_col = column_index(&headers, &columns.conditions)?;

    let mut report = WeatherReport::default();
    let mut by_date: BTreeMap<NaiveDate, DailyWeather> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        report.rows_read += 1;
        let raw_date = row.get(date_col).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| Error::InvalidRow {
            row: line,
            message: format!("unparseable date `{raw_date}`"),
        })?;
        if !range.contains(date) {
            report.out_of_range += 1;
            continue;
        }
        let raw_precip = row.get(precip_col).unwrap_or("").trim();
        let precipitation_in = if raw_precip.is_empty() {
            report.missing_precipitation += 1;
            0.0
        } else {
            let v: f64 = raw_precip.parse().map_err(|_| Error::InvalidRow {
                row: line,
                message: format!("unparseable precipitation `{raw_precip}`"),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidRow {
                    row: line,
                    message: format!("precipitation must be a non-negative number, got {v}"),
                });
            }
            v
        };
        let record = DailyWeather {
            date,
            precipitation_in,
            precip_indicator: u8::from(precipitation_in > 0.0),
            conditions: row.get(cond_col).unwrap_or("").trim().to_string(),
        };
        match by_date.get_mut(&date) {
            Some(existing) => {
                report.duplicate_dates += 1;
                if record.precipitation_in > existing.precipitation_in {
                    *existing = record;
                }
            }
            None => {
                by_date.insert(date, record);
            }
        }
    }
    if report.missing_precipitation > 0 {
        log::warn!(
            "{} weather rows had no precipitation value; treated as 0",
            report.missing_precipitation
        );
    }
    let missing: Vec<String> = range
        .iter()
        .filter(|d| !by_date.contains_key(d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::WeatherGap(missing));
    }
    let records: Vec<DailyWeather> = by_date.into_values().collect();
    report.retained = records.len();
    Ok(WeatherIngest { records, report })
}

/// Builds the complete (date, hour) grid over `range`, zero-filling hours
/// without crashes.
pub fn build_hourly_grid(
    crashes: &[CrashRecord],
    weather: &[DailyWeather],
    range: &DateRange,
) -> Result<Vec<HourlyObservation>> {
    let days = range.days();
    let mut daily: Vec<Option<&DailyWeather>> = vec![None; days];
    for w in weather {
        if let Some(offset) = range.offset(w.date) {
            daily[offset] = Some(w);
        }
    }
    let missing: Vec<String> = range
        .iter()
        .zip(&daily)
        .filter(|(_, w)| w.is_none())
        .map(|(d, _)| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::WeatherGap(missing));
    }

    let mut counts = vec![0u32; days * 24];
    for crash in crashes {
        let parts = derive_time_parts(crash.reported_at);
        let offset = range.offset(parts.date).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "crash {} at {} lies outside the grid range",
                crash.id, crash.reported_at
            ))
        })?;
        counts[offset * 24 + parts.hour as usize] += 1;
    }

    let mut grid = Vec::with_capacity(days * 24);
    for (offset, (date, w)) in range.iter().zip(daily).enumerate() {
        let w = w.expect("coverage checked above");
        let weekday = Weekday::from_chrono(date.weekday());
        for hour in 0..24u8 {
            grid.push(HourlyObservation {
                date,
                hour,
                weekday,
                month: date.month() as u8,
                crash_count: counts[offset * 24 + hour as usize],
                precip_indicator: w.precip_indicator,
                precip_in: w.precipitation_in,
            });
        }
    }
    Ok(grid)
}

pub const GRID_HEADER: [&str; 6] = ["date", "hour", "weekday", "month", "crash_count", "precip"];

/// Writes the canonical grid CSV. The `precip` column carries daily inches.
pub fn write_grid_csv<W: Write>(grid: &[HourlyObservation], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(GRID_HEADER)?;
    for obs in grid {
        writer.write_record([
            obs.date.to_string(),
            obs.hour.to_string(),
            obs.weekday.code().to_string(),
            obs.month.to_string(),
            obs.crash_count.to_string(),
            obs.precip_in.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(source: R) -> Result<Vec<HourlyObservation>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = read_headers(&mut reader, "grid")?;
    let idx: Vec<usize> = GRID_HEADER
        .iter()
        .map(|name| column_index(&headers, name))
        .collect::<Result<_>>()?;
    let mut grid = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let field = |k: usize| row.get(idx[k]).unwrap_or("").trim();
        let bad = |what: &str| Error::InvalidRow {
            row: line,
            message: format!("bad {what}"),
        };
        let date = parse_date(field(0)).ok_or_else(|| bad("date"))?;
        let hour: u8 = field(1).parse().map_err(|_| bad("hour"))?;
        let weekday: Weekday = field(2).parse().map_err(|_| bad("weekday"))?;
        let month: u8 = field(3).parse().map_err(|_| bad("month"))?;
        let crash_count: u32 = field(4).parse().map_err(|_| bad("crash_count"))?;
        let precip_in: f64 = field(5).parse().map_err(|_| bad("precip"))?;
        let parts = derive_time_parts(date.and_hms_opt(0, 0, 0).unwrap());
        if hour > 23 || parts.weekday != weekday || parts.month != month || precip_in < 0.0 {
            return Err(bad("row (inconsistent hour/weekday/month/precip)"));
        }
        grid.push(HourlyObservation {
            date,
            hour,
            weekday,
            month,
            crash_count,
            precip_indicator: u8::from(precip_in > 0.0),
            precip_in,
        });
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput("grid CSV has no rows".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range_2016_2019() -> DateRange {
        DateRange::default()
    }

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    #[test]
    fn duplicate_ids_collapse_to_first() {
        let csv = "OBJECTID,REPORTDATE\nA,2016-03-01T10:00:00\nB,2016-03-01T11:00:00\nA,2016-03-02T10:00:00\n";
        let out = parse_crash_csv(csv.as_bytes(), &range_2016_2019(), &Default::default()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.report.duplicate_ids, 1);
        assert_eq!(out.records[0].reported_at, ts("2016-03-01T10:00"));
    }

    #[test]
    fn out_of_range_rows_are_excluded() {
        let csv = "OBJECTID,REPORTDATE\nA,2015/12/31 23:59:00+00\nB,2016/01/01 00:00:00+00\n";
        let out = parse_crash_csv(csv.as_bytes(), &range_2016_2019(), &Default::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].id, "B");
        assert_eq!(out.report.out_of_range, 1);
    }

    #[test]
    fn bad_timestamps_are_counted_not_coerced() {
        let csv = "OBJECTID,REPORTDATE\nA,not a date\nB,2016-13-01 10:00\nC,2016-05-01 10:00\n";
        let out = parse_crash_csv(csv.as_bytes(), &range_2016_2019(), &Default::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.report.bad_timestamps, 2);
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "OBJECTID,WHEN\nA,2016-03-01T10:00:00\n";
        let err = parse_crash_csv(csv.as_bytes(), &range_2016_2019(), &Default::default())
            .unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "REPORTDATE"), "{err}");
    }

    #[test]
    fn empty_file_is_an_error() {
        let err = parse_crash_csv(&b""[..], &range_2016_2019(), &Default::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn custom_column_names() {
        let csv = "key,when\nx,2016-03-01 10:20\n";
        let cols = CrashColumns {
            id: "key".into(),
            reported_at: "when".into(),
        };
        let out = parse_crash_csv(csv.as_bytes(), &range_2016_2019(), &cols).unwrap();
        assert_eq!(out.records[0].reported_at, ts("2016-03-01 10:20"));
    }

    #[test]
    fn timestamp_formats() {
        let expected = NaiveDate::from_ymd_opt(2016, 1, 1)
            .unwrap()
            .and_hms_opt(8, 15, 0)
            .unwrap();
        for raw in [
            "2016-01-01T08:15:42",
            "2016-01-01T08:15:00Z",
            "2016-01-01 08:15",
            "2016/01/01 08:15:00",
            "2016/01/01 08:15:00+00",
            "2016-01-01T08:15:00.000-05:00",
        ] {
            assert_eq!(parse_timestamp(raw), Some(expected), "{raw}");
        }
    }

    #[test]
    fn time_parts_examples() {
        let p = derive_time_parts(ts("2016-01-01T08:15"));
        assert_eq!((p.hour, p.weekday, p.month), (8, Weekday::Friday, 1));
        let p = derive_time_parts(ts("2017-03-15T00:00"));
        assert_eq!((p.hour, p.weekday, p.month), (0, Weekday::Wednesday, 3));
        let p = derive_time_parts(ts("2016-02-29T23:59"));
        assert_eq!((p.hour, p.weekday, p.month), (23, Weekday::Monday, 2));
    }

    fn weather_csv(rows: &[(&str, &str)]) -> String {
        let mut s = String::from("Datetime,Precipitation,Conditions\n");
        for (d, p) in rows {
            s.push_str(&format!("{d},{p},Clear\n"));
        }
        s
    }

    #[test]
    fn weather_duplicate_keeps_max() {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2016, 11, 6).unwrap(),
            NaiveDate::from_ymd_opt(2016, 11, 6).unwrap(),
        )
        .unwrap();
        let csv = weather_csv(&[("2016-11-06", "0.0"), ("2016-11-06", "0.3")]);
        let out = parse_weather_csv(csv.as_bytes(), &range, &Default::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].precipitation_in, 0.3);
        assert_eq!(out.records[0].precip_indicator, 1);
        assert_eq!(out.report.duplicate_dates, 1);
    }

    #[test]
    fn weather_tie_keeps_first() {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2016, 11, 6).unwrap(),
            NaiveDate::from_ymd_opt(2016, 11, 6).unwrap(),
        )
        .unwrap();
        let csv = "Datetime,Precipitation,Conditions\n2016-11-06,0.1,First\n2016-11-06,0.1,Second\n";
        let out = parse_weather_csv(csv.as_bytes(), &range, &Default::default()).unwrap();
        assert_eq!(out.records[0].conditions, "First");
    }

    #[test]
    fn weather_gap_lists_missing_dates() {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2016, 1, 3).unwrap(),
        )
        .unwrap();
        let csv = weather_csv(&[("2016-01-01", "0"), ("2016-01-03", "0")]);
        let err = parse_weather_csv(csv.as_bytes(), &range, &Default::default()).unwrap_err();
        match err {
            Error::WeatherGap(dates) => assert_eq!(dates, vec!["2016-01-02".to_string()]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_precipitation_is_zero_with_warning() {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
        )
        .unwrap();
        let csv = weather_csv(&[("2016-01-01", "")]);
        let out = parse_weather_csv(csv.as_bytes(), &range, &Default::default()).unwrap();
        assert_eq!(out.records[0].precipitation_in, 0.0);
        assert_eq!(out.records[0].precip_indicator, 0);
        assert_eq!(out.report.missing_precipitation, 1);
    }

    #[test]
    fn tab_separated_visual_crossing_layout() {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2015, 1, 3).unwrap(),
        )
        .unwrap();
        let csv = "Datetime\tTemperature\tPrecipitation\tConditions\n\
                   2015-01-01\t36.1\t0.00\tPartially cloudy\n\
                   2015-01-02\t41.0\t0.00\tOvercast\n\
                   2015-01-03\t39.0\t0.43\tRain, Overcast\n";
        let out = parse_weather_csv(csv.as_bytes(), &range, &Default::default()).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.records[2].precip_indicator, 1);
        assert_eq!(out.records[2].precipitation_in, 0.43);
        assert_eq!(out.records[2].conditions, "Rain, Overcast");
    }

    fn dry_weather(range: &DateRange) -> Vec<DailyWeather> {
        range
            .iter()
            .map(|date| DailyWeather {
                date,
                precipitation_in: 0.0,
                precip_indicator: 0,
                conditions: String::new(),
            })
            .collect()
    }

    #[test]
    fn grid_counts_crashes_per_hour() {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2016, 1, 2).unwrap(),
        )
        .unwrap();
        let crashes = vec![
            CrashRecord {
                id: "1".into(),
                reported_at: ts("2016-01-01T08:05"),
            },
            CrashRecord {
                id: "2".into(),
                reported_at: ts("2016-01-01T08:50"),
            },
        ];
        let grid = build_hourly_grid(&crashes, &dry_weather(&range), &range).unwrap();
        assert_eq!(grid.len(), 48);
        assert_eq!(grid[8].crash_count, 2);
        assert_eq!(grid.iter().map(|o| o.crash_count).sum::<u32>(), 2);
    }

    #[test]
    fn grid_without_crashes_is_all_zero() {
        let range = range_2016_2019();
        let grid = build_hourly_grid(&[], &dry_weather(&range), &range).unwrap();
        assert_eq!(grid.len(), 1461 * 24);
        assert!(grid.iter().all(|o| o.crash_count == 0));
    }

    #[test]
    fn grid_requires_full_weather() {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2016, 1, 2).unwrap(),
        )
        .unwrap();
        let mut weather = dry_weather(&range);
        weather.pop();
        assert!(matches!(
            build_hourly_grid(&[], &weather, &range),
            Err(Error::WeatherGap(_))
        ));
    }

    #[test]
    fn weekday_parsing() {
        assert_eq!("MO".parse::<Weekday>().unwrap(), Weekday::Monday);
        assert_eq!("friday".parse::<Weekday>().unwrap(), Weekday::Friday);
        assert_eq!("Sat".parse::<Weekday>().unwrap(), Weekday::Saturday);
        assert!("XX".parse::<Weekday>().is_err());
    }
}
