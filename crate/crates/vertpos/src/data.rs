//! Domain records, dataset container, CSV ingestion and train/test splitting.
//!
//! The CSV format is UTF-8, comma separated, one header line, empty field =
//! absent value. Column order is configurable through [`CsvSchema`]; the
//! default matches the header
//! `device_id,time,longitude,latitude,speed,altitude,pressure`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fixed seed used by the experiment protocol when none is given.
pub const DEFAULT_SEED: u64 = 20181005;

/// Dimension of the full feature space.
pub const FEATURE_DIM: usize = 5;

/// Feature order inside a [`FeatureVector`].
pub const FEATURE_NAMES: [&str; FEATURE_DIM] =
    ["time", "longitude", "latitude", "pressure", "speed"];

/// Human-readable name for feature index `i` (0-based).
pub fn feature_name(i: usize) -> String {
    FEATURE_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("feature {i}"))
}

/// One column of the CSV schema / one field of an [`Observation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    DeviceId,
    Time,
    Longitude,
    Latitude,
    Speed,
    Pressure,
    Altitude,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::DeviceId => "device_id",
            Field::Time => "time",
            Field::Longitude => "longitude",
            Field::Latitude => "latitude",
            Field::Speed => "speed",
            Field::Pressure => "pressure",
            Field::Altitude => "altitude",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        match name.trim() {
            "device_id" => Some(Field::DeviceId),
            "time" => Some(Field::Time),
            "longitude" => Some(Field::Longitude),
            "latitude" => Some(Field::Latitude),
            "speed" => Some(Field::Speed),
            "pressure" => Some(Field::Pressure),
            "altitude" => Some(Field::Altitude),
            _ => None,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timestamped sensor record.
///
/// Coordinates are validated at parse time; violating rows are rejected,
/// never clamped. Optional fields are `None` when the CSV field is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub device_id: String,
    /// Seconds since the Unix epoch; sub-second precision preserved.
    pub time: f64,
    /// Degrees in [-180, 180].
    pub longitude: f64,
    /// Degrees in [-90, 90].
    pub latitude: f64,
    /// Meters per second, >= 0.
    pub speed: Option<f64>,
    /// Hectopascal, > 0.
    pub pressure: Option<f64>,
    /// Meters.
    pub altitude: Option<f64>,
}

impl Observation {
    pub fn has(&self, field: Field) -> bool {
        match field {
            Field::DeviceId | Field::Time | Field::Longitude | Field::Latitude => true,
            Field::Speed => self.speed.is_some(),
            Field::Pressure => self.pressure.is_some(),
            Field::Altitude => self.altitude.is_some(),
        }
    }

    /// Numeric value of `field`, if present (device_id has none).
    pub fn value(&self, field: Field) -> Option<f64> {
        match field {
            Field::DeviceId => None,
            Field::Time => Some(self.time),
            Field::Longitude => Some(self.longitude),
            Field::Latitude => Some(self.latitude),
            Field::Speed => self.speed,
            Field::Pressure => self.pressure,
            Field::Altitude => self.altitude,
        }
    }

    /// Full feature vector `(time, longitude, latitude, pressure, speed)`,
    /// or `None` when pressure or speed is absent.
    pub fn feature_vector(&self) -> Option<FeatureVector> {
        let pressure = self.pressure?;
        let speed = self.speed?;
        FeatureVector::new(vec![self.time, self.longitude, self.latitude, pressure, speed]).ok()
    }

    /// Serialize back to one CSV row under `schema`. Floats are written in
    /// shortest round-trip form, so re-parsing yields a bit-equal record.
    pub fn to_csv_row(&self, schema: &CsvSchema) -> String {
        let mut fields = Vec::with_capacity(schema.columns.len());
        for &col in &schema.columns {
            let s = match col {
                Field::DeviceId => self.device_id.clone(),
                Field::Time => format_f64(self.time),
                Field::Longitude => format_f64(self.longitude),
                Field::Latitude => format_f64(self.latitude),
                Field::Speed => self.speed.map(format_f64).unwrap_or_default(),
                Field::Pressure => self.pressure.map(format_f64).unwrap_or_default(),
                Field::Altitude => self.altitude.map(format_f64).unwrap_or_default(),
            };
            fields.push(s);
        }
        fields.join(",")
    }
}

/// Shortest decimal form that parses back to the same f64 bits.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Fixed-order feature vector of `I` finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "feature vector entry {bad} is not finite"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A feature vector paired with its altitude and quantized class label.
///
/// `class_label` is 1-based and must be consistent with `altitude` under the
/// active quantization scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: FeatureVector,
    pub altitude: f64,
    pub class_label: usize,
}

/// Ordered collection of observations plus their provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Vec<Observation>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(points: Vec<Observation>, provenance: impl Into<String>) -> Self {
        Dataset {
            points,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// New dataset keeping only the rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Column layout of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub columns: Vec<Field>,
}

impl CsvSchema {
    /// `device_id,time,longitude,latitude,speed,altitude,pressure`
    pub fn standard() -> Self {
        CsvSchema {
            columns: vec![
                Field::DeviceId,
                Field::Time,
                Field::Longitude,
                Field::Latitude,
                Field::Speed,
                Field::Altitude,
                Field::Pressure,
            ],
        }
    }

    /// Parse a header line into a schema. Unknown column names and missing
    /// required columns (device_id, time, longitude, latitude) are errors.
    pub fn from_header(header: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for name in header.split(',') {
            let field = Field::from_name(name).ok_or_else(|| {
                Error::InvalidConfig(format!("unknown CSV column '{}'", name.trim()))
            })?;
            if columns.contains(&field) {
                return Err(Error::InvalidConfig(format!("duplicate CSV column '{field}'")));
            }
            columns.push(field);
        }
        let schema = CsvSchema { columns };
        for required in [Field::DeviceId, Field::Time, Field::Longitude, Field::Latitude] {
            if !schema.columns.contains(&required) {
                return Err(Error::InvalidConfig(format!(
                    "CSV header is missing required column '{required}'"
                )));
            }
        }
        Ok(schema)
    }

    pub fn header(&self) -> String {
        self.columns
            .iter()
            .map(|c| c.name())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Why a CSV row was skipped.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RejectReason {
    #[error("expected {expected} fields, found {found}")]
    WrongFieldCount { expected: usize, found: usize },
    #[error("required column '{column}' is empty")]
    MissingRequiredColumn { column: &'static str },
    #[error("malformed number in column '{column}': '{value}'")]
    MalformedNumber { column: &'static str, value: String },
    #[error("coordinate out of range in column '{column}': {value}")]
    CoordinateOutOfRange { column: &'static str, value: f64 },
    #[error("negative speed: {value}")]
    NegativeSpeed { value: f64 },
    #[error("non-positive pressure: {value}")]
    NonPositivePressure { value: f64 },
}

/// A skipped row: 1-based row number (header = row 1) plus the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub row: usize,
    pub reason: RejectReason,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.reason)
    }
}

fn parse_required_number(
    raw: &str,
    column: &'static str,
) -> std::result::Result<f64, RejectReason> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(RejectReason::MissingRequiredColumn { column });
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(RejectReason::MalformedNumber {
            column,
            value: trimmed.to_string(),
        }),
    }
}

fn parse_optional_number(
    raw: &str,
    column: &'static str,
) -> std::result::Result<Option<f64>, RejectReason> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(RejectReason::MalformedNumber {
            column,
            value: trimmed.to_string(),
        }),
    }
}

/// Parse one CSV data row into an [`Observation`].
///
/// `row` is the 1-based line number used in the rejection on failure.
pub fn parse_csv_record(
    line: &str,
    schema: &CsvSchema,
    row: usize,
) -> std::result::Result<Observation, Rejection> {
    let reject = |reason| Rejection { row, reason };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != schema.columns.len() {
        return Err(reject(RejectReason::WrongFieldCount {
            expected: schema.columns.len(),
            found: fields.len(),
        }));
    }

    let mut device_id = None;
    let mut time = None;
    let mut longitude = None;
    let mut latitude = None;
    let mut speed = None;
    let mut pressure = None;
    let mut altitude = None;

    for (&col, raw) in schema.columns.iter().zip(&fields) {
        match col {
            Field::DeviceId => {
                let id = raw.trim();
                if id.is_empty() {
                    return Err(reject(RejectReason::MissingRequiredColumn {
                        column: "device_id",
                    }));
                }
                device_id = Some(id.to_string());
            }
            Field::Time => time = Some(parse_required_number(raw, "time").map_err(reject)?),
            Field::Longitude => {
                let v = parse_required_number(raw, "longitude").map_err(reject)?;
                if !(-180.0..=180.0).contains(&v) {
                    return Err(reject(RejectReason::CoordinateOutOfRange {
                        column: "longitude",
                        value: v,
                    }));
                }
                longitude = Some(v);
            }
            Field::Latitude => {
                let v = parse_required_number(raw, "latitude").map_err(reject)?;
                if !(-90.0..=90.0).contains(&v) {
                    return Err(reject(RejectReason::CoordinateOutOfRange {
                        column: "latitude",
                        value: v,
                    }));
                }
                latitude = Some(v);
            }
            Field::Speed => {
                let v = parse_optional_number(raw, "speed").map_err(reject)?;
                if let Some(s) = v {
                    if s < 0.0 {
                        return Err(reject(RejectReason::NegativeSpeed { value: s }));
                    }
                }
                speed = v;
            }
            Field::Pressure => {
                let v = parse_optional_number(raw, "pressure").map_err(reject)?;
                if let Some(p) = v {
                    if p <= 0.0 {
                        return Err(reject(RejectReason::NonPositivePressure { value: p }));
                    }
                }
                pressure = v;
            }
            Field::Altitude => {
                altitude = parse_optional_number(raw, "altitude").map_err(reject)?;
            }
        }
    }

    Ok(Observation {
        device_id: device_id.expect("schema guarantees device_id"),
        time: time.expect("schema guarantees time"),
        longitude: longitude.expect("schema guarantees longitude"),
        latitude: latitude.expect("schema guarantees latitude"),
        speed,
        pressure,
        altitude,
    })
}

/// Load a CSV file. Accepted rows are returned in file order; every skipped
/// row appears in the rejection list with its line number and reason.
///
/// The file's header must match `schema`. Zero accepted rows is an error.
pub fn load_dataset(path: &Path, schema: &CsvSchema) -> Result<(Dataset, Vec<Rejection>)> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut points = Vec::new();
    let mut rejections = Vec::new();
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|source| Error::IoFailure {
            path: path.to_path_buf(),
            source,
        })?,
        None => return Err(Error::EmptyDataset),
    };
    let file_schema = CsvSchema::from_header(&header)?;
    if file_schema != *schema {
        return Err(Error::InvalidConfig(format!(
            "CSV header '{}' does not match the expected schema '{}'",
            header.trim(),
            schema.header()
        )));
    }

    for (idx, line) in lines {
        let line = line.map_err(|source| Error::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row = idx + 1; // 1-based, header included
        match parse_csv_record(&line, schema, row) {
            Ok(obs) => points.push(obs),
            Err(rej) => rejections.push(rej),
        }
    }

    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((
        Dataset::new(points, path.display().to_string()),
        rejections,
    ))
}

/// Seeded uniform shuffle followed by a prefix split.
///
/// `|train| = round(train_fraction * N)`. Same seed, same partition; the two
/// halves are disjoint and together contain every input element exactly once.
pub fn split_train_test<T>(
    points: Vec<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut slots: Vec<Option<T>> = points.into_iter().map(Some).collect();
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (pos, &idx) in order.iter().enumerate() {
        let item = slots[idx].take().expect("each index visited once");
        if pos < n_train {
            train.push(item);
        } else {
            test.push(item);
        }
    }
    Ok((train, test))
}
