//! Reading daily epidemic counts, per-capita scaling and time normalization.
//!
//! Input rows are keyed by `(date, region)` and carry one column per
//! [`Variable`]. Series are grouped per `(region, variable)`, sorted by date
//! and validated; nothing is imputed. A gap inside the analysis window is an
//! error that the caller has to fix upstream.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{FdaError, Result};

/// Scaled values are expressed per this many inhabitants.
pub const PER_CAPITA_BASE: f64 = 100_000.0;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    PositiveTests,
    Deaths,
    Recovered,
    Hospitalized,
    Critical,
}

impl Variable {
    pub const ALL: [Variable; 5] = [
        Variable::PositiveTests,
        Variable::Deaths,
        Variable::Recovered,
        Variable::Hospitalized,
        Variable::Critical,
    ];

    /// The three predictors, in model order.
    pub const PREDICTORS: [Variable; 3] =
        [Variable::PositiveTests, Variable::Deaths, Variable::Recovered];

    /// The two responses, in model order.
    pub const RESPONSES: [Variable; 2] = [Variable::Hospitalized, Variable::Critical];

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::PositiveTests => "positive_tests",
            Variable::Deaths => "deaths",
            Variable::Recovered => "recovered",
            Variable::Hospitalized => "hospitalized",
            Variable::Critical => "critical",
        }
    }

    /// Short symbol used in reports: X1..X3 for predictors, Y1, Y2 for responses.
    pub fn symbol(self) -> &'static str {
        match self {
            Variable::PositiveTests => "X1",
            Variable::Deaths => "X2",
            Variable::Recovered => "X3",
            Variable::Hospitalized => "Y1",
            Variable::Critical => "Y2",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variable {
    type Err = FdaError;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.as_str() == s || v.symbol().eq_ignore_ascii_case(s))
            .ok_or_else(|| FdaError::Validation(format!("unknown variable '{s}'")))
    }
}

/// Column names of the input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub date: String,
    pub region: String,
    pub variables: Vec<(Variable, String)>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            date: "date".into(),
            region: "region".into(),
            variables: Variable::ALL
                .iter()
                .map(|v| (*v, v.as_str().to_string()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub region: String,
    pub variable: Variable,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl RawSeries {
    pub fn new(
        region: impl Into<String>,
        variable: Variable,
        dates: Vec<NaiveDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let region = region.into();
        if dates.len() != values.len() {
            return Err(FdaError::Validation(format!(
                "{region}/{variable}: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(FdaError::Validation(format!(
                "{region}/{variable}: dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(FdaError::Validation(format!(
                "{region}/{variable}: invalid count {v}"
            )));
        }
        Ok(RawSeries {
            region,
            variable,
            dates,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled_by(&self, factor: f64) -> Result<Self> {
        RawSeries::new(
            self.region.clone(),
            self.variable,
            self.dates.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationTable {
    pub entries: BTreeMap<String, u64>,
}

impl PopulationTable {
    pub fn new(entries: impl IntoIterator<Item = (String, u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (region, pop) in entries {
            if pop == 0 {
                return Err(FdaError::Validation(format!(
                    "population of '{region}' must be positive"
                )));
            }
            if map.insert(region.clone(), pop).is_some() {
                return Err(FdaError::Validation(format!(
                    "region '{region}' listed twice in population table"
                )));
            }
        }
        Ok(PopulationTable { entries: map })
    }

    pub fn get(&self, region: &str) -> Result<u64> {
        self.entries
            .get(region)
            .copied()
            .ok_or_else(|| FdaError::UnknownRegion(region.to_string()))
    }

    pub fn regions(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub points: Vec<f64>,
    pub origin_date: NaiveDate,
    pub end_date: NaiveDate,
    pub dates: Vec<NaiveDate>,
}

impl TimeGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSeries {
    pub region: String,
    pub variable: Variable,
    pub grid: TimeGrid,
    /// Persons per 100,000 inhabitants.
    pub values: Vec<f64>,
}

/// Parses the wide daily CSV into one [`RawSeries`] per `(region, variable)`.
///
/// Output is sorted by region name, then by variable in [`Variable::ALL`]
/// order. Empty cells, unparsable numbers, negative counts and repeated
/// `(date, region)` keys are rejected with the offending line number.
pub fn parse_series(csv_text: &str, schema: &ColumnSchema) -> Result<Vec<RawSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| FdaError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FdaError::Parse {
                line: 1,
                message: format!("header is missing column '{name}'"),
            })
    };
    let date_col = column(&schema.date)?;
    let region_col = column(&schema.region)?;
    let var_cols = schema
        .variables
        .iter()
        .map(|(v, name)| Ok((*v, column(name)?, name.as_str())))
        .collect::<Result<Vec<_>>>()?;

    // region -> date -> values in schema order
    let mut rows: BTreeMap<String, BTreeMap<NaiveDate, Vec<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| FdaError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |idx: usize| record.get(idx).unwrap_or("");

        let date = NaiveDate::parse_from_str(cell(date_col), DATE_FORMAT).map_err(|e| {
            FdaError::Parse {
                line,
                message: format!("bad date '{}': {e}", cell(date_col)),
            }
        })?;
        let region = cell(region_col);
        if region.is_empty() {
            return Err(FdaError::Parse {
                line,
                message: "empty region".into(),
            });
        }

        let mut values = Vec::with_capacity(var_cols.len());
        for &(_, idx, name) in &var_cols {
            let raw = cell(idx);
            if raw.is_empty() {
                return Err(FdaError::Validation(format!(
                    "line {line}: missing value in column '{name}'"
                )));
            }
            let value: f64 = raw.parse().map_err(|_| FdaError::Parse {
                line,
                message: format!("column '{name}': '{raw}' is not a number"),
            })?;
            if !value.is_finite() || value < 0.0 {
                return Err(FdaError::Validation(format!(
                    "line {line}: column '{name}' has negative or non-finite count {raw}"
                )));
            }
            values.push(value);
        }

        let by_date = rows.entry(region.to_string()).or_default();
        if by_date.insert(date, values).is_some() {
            return Err(FdaError::DuplicateKey {
                line,
                date: date.to_string(),
                region: region.to_string(),
            });
        }
    }

    let mut order: Vec<usize> = (0..var_cols.len()).collect();
    order.sort_by_key(|&i| var_cols[i].0);

    let mut out = Vec::with_capacity(rows.len() * var_cols.len());
    for (region, by_date) in rows {
        let dates: Vec<NaiveDate> = by_date.keys().copied().collect();
        for &i in &order {
            let values = by_date.values().map(|row| row[i]).collect();
            out.push(RawSeries::new(
                region.clone(),
                var_cols[i].0,
                dates.clone(),
                values,
            )?);
        }
    }
    Ok(out)
}

/// Parses a `region,population` CSV.
pub fn parse_population(csv_text: &str) -> Result<PopulationTable> {
    #[derive(Deserialize)]
    struct Row {
        region: String,
        population: u64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let mut entries = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| FdaError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        entries.push((row.region, row.population));
    }
    PopulationTable::new(entries)
}

/// Restricts a series to `[start, end]` and checks that every calendar day
/// in the window is present.
pub fn restrict_window(series: &RawSeries, start: NaiveDate, end: NaiveDate) -> Result<RawSeries> {
    if start >= end {
        return Err(FdaError::Config(format!(
            "date window start {start} is not before end {end}"
        )));
    }
    let (dates, values): (Vec<_>, Vec<_>) = series
        .dates
        .iter()
        .zip(&series.values)
        .filter(|(d, _)| **d >= start && **d <= end)
        .map(|(d, v)| (*d, *v))
        .unzip();

    let expected = (end - start).num_days() as usize + 1;
    if dates.len() != expected {
        let mut day = start;
        let mut missing = None;
        for d in &dates {
            if *d != day {
                missing = Some(day);
                break;
            }
            day = day.succ_opt().unwrap_or(day);
        }
        let first_missing = missing.unwrap_or(day);
        return Err(FdaError::Validation(format!(
            "{}/{}: {} of {expected} days present in window {start}..{end}; first gap at {first_missing}",
            series.region,
            series.variable,
            dates.len()
        )));
    }
    RawSeries::new(series.region.clone(), series.variable, dates, values)
}

/// Maps `m` ordered dates onto `k / (m - 1)`, `k = 0..m`.
pub fn normalize_grid(dates: &[NaiveDate]) -> Result<TimeGrid> {
    if dates.len() < 2 {
        return Err(FdaError::InvalidArgument(format!(
            "a time grid needs at least 2 dates, got {}",
            dates.len()
        )));
    }
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FdaError::InvalidArgument(
            "dates must be strictly increasing".into(),
        ));
    }
    let last = (dates.len() - 1) as f64;
    let mut points: Vec<f64> = (0..dates.len()).map(|k| k as f64 / last).collect();
    // pin the endpoint exactly
    *points.last_mut().unwrap() = 1.0;
    Ok(TimeGrid {
        points,
        origin_date: dates[0],
        end_date: *dates.last().unwrap(),
        dates: dates.to_vec(),
    })
}

/// Divides by the regional population and multiplies by 100,000.
pub fn scale_per_capita(series: &RawSeries, pop: &PopulationTable) -> Result<ScaledSeries> {
    let population = pop.get(&series.region)? as f64;
    let grid = normalize_grid(&series.dates)?;
    let values = series
        .values
        .iter()
        .map(|v| v / population * PER_CAPITA_BASE)
        .collect();
    Ok(ScaledSeries {
        region: series.region.clone(),
        variable: series.variable,
        grid,
        values,
    })
}
