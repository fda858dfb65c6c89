//! Monthly temperature table and the year-indexed sampling temperatures
//! derived from it.
//!
//! Two scalars are produced for each year:
//!
//! * **pitch temperature**: `1 - cos(Δ(year), Δ(reference))` clamped to
//!   `[0, 1]`, where `Δ` is the forward difference of the 12 monthly values.
//! * **duration temperature**: the annual mean of the 12 monthly values,
//!   min-max normalized over the whole table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const FIRST_YEAR: i32 = 1876;
pub const LAST_YEAR: i32 = 2021;
pub const REFERENCE_YEAR: i32 = 1876;

/// Plausible range for a monthly mean daily maximum in Tokyo.
pub const PLAUSIBLE_CELSIUS: (f64, f64) = (-10.0, 45.0);

const MONTHS: [&str; 12] =
    ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];

#[derive(Debug, Error, PartialEq)]
pub enum ClimateError {
    #[error("header row `year,jan,...,dec` is missing")]
    MissingHeader,
    #[error("unexpected header {0:?}; expected `year,jan,...,dec`")]
    BadHeader(String),
    #[error("year {year}: missing value for {month}")]
    MissingMonth { year: i32, month: &'static str },
    #[error("line {line}: {column} value {value:?} is not a number")]
    NotNumeric { line: u64, column: String, value: String },
    #[error("year {0} appears more than once")]
    DuplicateYear(i32),
    #[error("year {year}, {month}: {value} °C is outside the plausible range")]
    Implausible { year: i32, month: &'static str, value: f64 },
    #[error("year {year} is not in the table ({first}..={last})")]
    UnknownYear { year: i32, first: i32, last: i32 },
    #[error("the table has no rows")]
    EmptyTable,
    #[error("vectors must have equal lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    DegenerateVector,
    #[error("every year has the same annual mean; min-max normalization is undefined")]
    DegenerateRange,
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("bad temperatures file: {0}")]
    Format(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// SHA-256 of the CSV bytes.
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClimateTable {
    rows: BTreeMap<i32, [f64; 12]>,
    pub provenance: Provenance,
}

impl ClimateTable {
    pub fn from_rows(rows: BTreeMap<i32, [f64; 12]>, source: impl Into<String>) -> Self {
        Self { rows, provenance: Provenance { source: source.into(), sha256: String::new() } }
    }

    pub fn load(path: &Path) -> Result<Self, ClimateError> {
        let text = std::fs::read_to_string(path).map_err(|e| ClimateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut table = parse_climate_csv(&text)?;
        table.provenance.source = path.display().to_string();
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.rows.keys().copied()
    }

    pub fn first_year(&self) -> Option<i32> {
        self.rows.keys().next().copied()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.rows.keys().next_back().copied()
    }

    pub fn monthly(&self, year: i32) -> Result<&[f64; 12], ClimateError> {
        self.rows.get(&year).ok_or_else(|| self.unknown(year))
    }

    pub fn annual_mean(&self, year: i32) -> Result<f64, ClimateError> {
        Ok(self.monthly(year)?.iter().sum::<f64>() / 12.0)
    }

    fn unknown(&self, year: i32) -> ClimateError {
        ClimateError::UnknownYear {
            year,
            first: self.first_year().unwrap_or(FIRST_YEAR),
            last: self.last_year().unwrap_or(LAST_YEAR),
        }
    }
}

/// Parse `year,jan,...,dec` CSV. Cells may be quoted or padded with spaces.
pub fn parse_climate_csv(text: &str) -> Result<ClimateTable, ClimateError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(ClimateError::MissingHeader),
        Some(r) => r.map_err(|e| ClimateError::Csv(e.to_string()))?,
    };
    let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    let expected: Vec<&str> = std::iter::once("year").chain(MONTHS).collect();
    if names.iter().all(|h| h.is_empty()) {
        return Err(ClimateError::MissingHeader);
    }
    if names != expected {
        return Err(ClimateError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut rows = BTreeMap::new();
    for record in records {
        let record = record.map_err(|e| ClimateError::Csv(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let year_cell = &record[0];
        let year: i32 = year_cell.parse().map_err(|_| ClimateError::NotNumeric {
            line,
            column: "year".into(),
            value: year_cell.into(),
        })?;
        let mut values = [0.0; 12];
        for (m, slot) in values.iter_mut().enumerate() {
            let cell = record.get(m + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(ClimateError::MissingMonth { year, month: MONTHS[m] });
            }
            let v: f64 = cell.parse().map_err(|_| ClimateError::NotNumeric {
                line,
                column: MONTHS[m].into(),
                value: cell.into(),
            })?;
            if !v.is_finite() || v < PLAUSIBLE_CELSIUS.0 || v > PLAUSIBLE_CELSIUS.1 {
                return Err(ClimateError::Implausible { year, month: MONTHS[m], value: v });
            }
            *slot = v;
        }
        if rows.insert(year, values).is_some() {
            return Err(ClimateError::DuplicateYear(year));
        }
    }
    Ok(ClimateTable {
        rows,
        provenance: Provenance {
            source: "<inline>".into(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        },
    })
}

/// `out[i] = monthly[i + 1] - monthly[i]`.
pub fn forward_difference(monthly: &[f64; 12]) -> [f64; 11] {
    std::array::from_fn(|i| monthly[i + 1] - monthly[i])
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, ClimateError> {
    if a.len() != b.len() {
        return Err(ClimateError::LengthMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(ClimateError::DegenerateVector);
    }
    Ok(dot / (na * nb))
}

pub fn pitch_temperature(table: &ClimateTable, year: i32) -> Result<f64, ClimateError> {
    pitch_temperature_against(table, year, REFERENCE_YEAR)
}

pub fn pitch_temperature_against(
    table: &ClimateTable,
    year: i32,
    reference: i32,
) -> Result<f64, ClimateError> {
    let query = forward_difference(table.monthly(year)?);
    let base = forward_difference(table.monthly(reference)?);
    if year == reference {
        return Ok(0.0);
    }
    let similarity = cosine_similarity(&query, &base)?;
    Ok((1.0 - similarity).clamp(0.0, 1.0))
}

pub fn duration_temperature(table: &ClimateTable) -> Result<BTreeMap<i32, f64>, ClimateError> {
    if table.is_empty() {
        return Err(ClimateError::EmptyTable);
    }
    let means: Vec<(i32, f64)> =
        table.rows.iter().map(|(y, m)| (*y, m.iter().sum::<f64>() / 12.0)).collect();
    let min = means.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let max = means.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(ClimateError::DegenerateRange);
    }
    Ok(means.into_iter().map(|(y, v)| (y, (v - min) / (max - min))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearTemperatures {
    pub pitch: f64,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureVectors {
    pub reference_year: i32,
    pub years: BTreeMap<i32, YearTemperatures>,
}

impl TemperatureVectors {
    pub fn get(&self, year: i32) -> Option<YearTemperatures> {
        self.years.get(&year).copied()
    }

    pub fn first_year(&self) -> Option<i32> {
        self.years.keys().next().copied()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.years.keys().next_back().copied()
    }

    /// `temperatures.json`, every number printed with 6 decimals.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{{\n  \"reference_year\": {},\n  \"years\": {{", self.reference_year);
        for (i, (year, t)) in self.years.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            let _ = write!(
                out,
                "{sep}\n    \"{year}\": {{ \"pitch\": {:.6}, \"duration\": {:.6} }}",
                t.pitch, t.duration
            );
        }
        out.push_str("\n  }\n}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self, ClimateError> {
        let parsed: TemperatureVectors =
            serde_json::from_str(text).map_err(|e| ClimateError::Format(e.to_string()))?;
        for (year, t) in &parsed.years {
            for v in [t.pitch, t.duration] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ClimateError::Format(format!("{year}: {v} is outside [0, 1]")));
                }
            }
        }
        Ok(parsed)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClimateError> {
        std::fs::write(path, self.to_json()).map_err(|e| ClimateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ClimateError> {
        let text = std::fs::read_to_string(path).map_err(|e| ClimateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

pub fn build_temperature_vectors(table: &ClimateTable) -> Result<TemperatureVectors, ClimateError> {
    let durations = duration_temperature(table)?;
    let years = durations
        .into_iter()
        .map(|(year, duration)| {
            let pitch = pitch_temperature(table, year)?;
            Ok((year, YearTemperatures { pitch, duration }))
        })
        .collect::<Result<BTreeMap<_, _>, ClimateError>>()?;
    Ok(TemperatureVectors { reference_year: REFERENCE_YEAR, years })
}
