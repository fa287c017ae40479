//! Event-based and uniform time-series data model plus CSV ingestion/export.
//!
//! The on-disk layout is a plain comma-separated file whose header starts
//! with `timestamp_ms`, followed by one column per PLC signal. Timestamps are
//! integer milliseconds; signal values are finite reals (booleans as `0`/`1`).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Name of the mandatory first CSV column.
pub const TIMESTAMP_HEADER: &str = "timestamp_ms";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing header row")]
    MissingHeader,
    #[error("first column must be named `{TIMESTAMP_HEADER}`, found `{0}`")]
    BadTimestampHeader(String),
    #[error("no feature columns")]
    NoFeatureColumns,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty cell at row {row}, column `{column}`")]
    EmptyCell { row: usize, column: String },
    #[error("non-numeric cell `{value}` at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("non-increasing timestamp at row {row}")]
    NonIncreasingTimestamp { row: usize },
    #[error("column `{column}` has {found} values, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("step must be positive, got {0} ms")]
    NonPositiveStep(i64),
    #[error("series is not uniformly spaced at row {row}")]
    NotUniform { row: usize },
}

/// One named signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub values: Vec<f64>,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Common access to the feature columns of either series flavour.
pub trait Columns: Sized {
    fn columns(&self) -> &[FeatureColumn];

    /// Returns a copy that keeps only the columns at `indices`, in that order.
    fn select_columns(&self, indices: &[usize]) -> Self;

    fn n_rows(&self) -> usize {
        self.columns().first().map_or(0, FeatureColumn::len)
    }

    fn column(&self, name: &str) -> Option<&FeatureColumn> {
        self.columns().iter().find(|c| c.name == name)
    }

    fn column_names(&self) -> Vec<String> {
        self.columns().iter().map(|c| c.name.clone()).collect()
    }
}

fn check_columns(columns: &[FeatureColumn], n: usize) -> Result<(), DatasetError> {
    if columns.is_empty() {
        return Err(DatasetError::NoFeatureColumns);
    }
    let mut seen = HashSet::new();
    for col in columns {
        if !seen.insert(col.name.as_str()) {
            return Err(DatasetError::DuplicateColumn(col.name.clone()));
        }
        if col.len() != n {
            return Err(DatasetError::LengthMismatch {
                column: col.name.clone(),
                expected: n,
                found: col.len(),
            });
        }
        if let Some(row) = col.values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite {
                row: row + 1,
                column: col.name.clone(),
            });
        }
    }
    Ok(())
}

/// Non-uniform multivariate series as logged by an event-based PLC: a row is
/// recorded only when some signal changes.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    name: String,
    timestamps: Vec<i64>,
    columns: Vec<FeatureColumn>,
}

impl EventSeries {
    pub fn new(
        name: impl Into<String>,
        timestamps: Vec<i64>,
        columns: Vec<FeatureColumn>,
    ) -> Result<Self, DatasetError> {
        if timestamps.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DatasetError::NonIncreasingTimestamp { row: i + 2 });
        }
        check_columns(&columns, timestamps.len())?;
        Ok(Self {
            name: name.into(),
            timestamps,
            columns,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[i]).collect()
    }
}

impl Columns for EventSeries {
    fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    fn select_columns(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            timestamps: self.timestamps.clone(),
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }
}

/// Equidistant series; row `i` sits at `start_ms + i * step_ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    start_ms: i64,
    step_ms: i64,
    columns: Vec<FeatureColumn>,
}

impl UniformSeries {
    pub fn new(
        start_ms: i64,
        step_ms: i64,
        columns: Vec<FeatureColumn>,
    ) -> Result<Self, DatasetError> {
        if step_ms <= 0 {
            return Err(DatasetError::NonPositiveStep(step_ms));
        }
        let n = columns.first().map_or(0, FeatureColumn::len);
        check_columns(&columns, n)?;
        if n == 0 {
            return Err(DatasetError::EmptyDataset);
        }
        Ok(Self {
            start_ms,
            step_ms,
            columns,
        })
    }

    /// Reinterprets an event series whose timestamps already form an
    /// arithmetic progression (e.g. a previously resampled file).
    pub fn from_events(events: &EventSeries) -> Result<Self, DatasetError> {
        let ts = events.timestamps();
        if ts.len() < 2 {
            return Err(DatasetError::EmptyDataset);
        }
        let step = ts[1] - ts[0];
        if let Some(i) = ts.windows(2).position(|w| w[1] - w[0] != step) {
            return Err(DatasetError::NotUniform { row: i + 2 });
        }
        Self::new(ts[0], step, events.columns().to_vec())
    }

    pub fn start_ms(&self) -> i64 {
        self.start_ms
    }

    pub fn step_ms(&self) -> i64 {
        self.step_ms
    }

    pub fn timestamp(&self, row: usize) -> i64 {
        self.start_ms + row as i64 * self.step_ms
    }

    pub fn timestamps(&self) -> Vec<i64> {
        (0..self.n_rows()).map(|i| self.timestamp(i)).collect()
    }

    /// Rows per second of the grid.
    pub fn sampling_frequency_hz(&self) -> f64 {
        1000.0 / self.step_ms as f64
    }

    pub fn into_event_series(self, name: impl Into<String>) -> EventSeries {
        let timestamps = self.timestamps();
        EventSeries {
            name: name.into(),
            timestamps,
            columns: self.columns,
        }
    }
}

impl Columns for UniformSeries {
    fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    fn select_columns(&self, indices: &[usize]) -> Self {
        Self {
            start_ms: self.start_ms,
            step_ms: self.step_ms,
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }
}

/// Parses an event CSV from any reader. `name` labels the resulting series.
pub fn parse_event_csv_reader<R: Read>(
    reader: R,
    name: impl Into<String>,
) -> Result<EventSeries, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| DatasetError::Csv(e.to_string()))?,
        None => return Err(DatasetError::MissingHeader),
    };
    let first = header.get(0).unwrap_or_default();
    if first != TIMESTAMP_HEADER {
        return Err(DatasetError::BadTimestampHeader(first.to_string()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if names.is_empty() {
        return Err(DatasetError::NoFeatureColumns);
    }
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(DatasetError::DuplicateColumn(n.clone()));
        }
    }

    let width = names.len() + 1;
    let mut timestamps: Vec<i64> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, record) in records.enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::Csv(e.to_string()))?;
        if record.len() != width {
            return Err(DatasetError::RaggedRow {
                row,
                expected: width,
                found: record.len(),
            });
        }
        let ts_cell = &record[0];
        if ts_cell.is_empty() {
            return Err(DatasetError::EmptyCell {
                row,
                column: TIMESTAMP_HEADER.into(),
            });
        }
        let ts: i64 = ts_cell.parse().map_err(|_| DatasetError::NonNumeric {
            row,
            column: TIMESTAMP_HEADER.into(),
            value: ts_cell.to_string(),
        })?;
        if timestamps.last().is_some_and(|&prev| ts <= prev) {
            return Err(DatasetError::NonIncreasingTimestamp { row });
        }
        timestamps.push(ts);

        for (c, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(DatasetError::EmptyCell {
                    row,
                    column: names[c].clone(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| DatasetError::NonNumeric {
                row,
                column: names[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFinite {
                    row,
                    column: names[c].clone(),
                });
            }
            values[c].push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }

    let columns = names
        .into_iter()
        .zip(values)
        .map(|(n, v)| FeatureColumn::new(n, v))
        .collect();
    EventSeries::new(name, timestamps, columns)
}

pub fn parse_event_csv(path: impl AsRef<Path>) -> Result<EventSeries, DatasetError> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_event_csv_reader(File::open(path)?, name)
}

/// Writes header + rows. `f64` uses the shortest representation that parses
/// back to the identical value.
pub fn write_csv_rows<W: Write>(
    out: W,
    timestamps: &[i64],
    columns: &[FeatureColumn],
) -> Result<(), DatasetError> {
    if columns.is_empty() {
        return Err(DatasetError::NoFeatureColumns);
    }
    let mut w = BufWriter::new(out);
    write!(w, "{TIMESTAMP_HEADER}")?;
    for c in columns {
        write!(w, ",{}", c.name)?;
    }
    writeln!(w)?;
    for (i, ts) in timestamps.iter().enumerate() {
        write!(w, "{ts}")?;
        for c in columns {
            write!(w, ",{}", c.values[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_event_csv(series: &EventSeries, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    write_csv_rows(File::create(path)?, series.timestamps(), series.columns())
}

pub fn write_uniform_csv(series: &UniformSeries, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    write_csv_rows(File::create(path)?, &series.timestamps(), series.columns())
}
