//! Variance and Spearman-correlation feature pruning.
//!
//! Pruning runs in two phases. Columns whose population variance falls below
//! `thr_var` go first; the survivors are then scanned pairwise in original
//! order and the later column of every pair with `|R| > thr_corr` is removed.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Columns, FeatureColumn};

pub const DEFAULT_THR_VAR: f64 = 0.001;
pub const DEFAULT_THR_CORR: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("column `{0}` is empty")]
    EmptyColumn(String),
    #[error("columns `{0}` and `{1}` differ in length")]
    LengthMismatch(String, String),
    #[error("need at least 2 samples, column `{0}` has fewer")]
    TooShort(String),
    #[error("degenerate column `{0}`: constant values have no rank variance")]
    DegenerateColumn(String),
    #[error("correlation matrix needs at least 2 columns")]
    TooFewColumns,
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("no features remain")]
    NoFeaturesRemain,
}

/// Population variance (divides by `n`).
pub fn column_variance(column: &FeatureColumn) -> Result<f64, SelectError> {
    if column.is_empty() {
        return Err(SelectError::EmptyColumn(column.name.clone()));
    }
    Ok(population_variance(&column.values))
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Zero-based ranks; tied values share the mean of the ranks they span.
pub fn rank_transform(column: &FeatureColumn) -> Result<Vec<f64>, SelectError> {
    if column.is_empty() {
        return Err(SelectError::EmptyColumn(column.name.clone()));
    }
    Ok(average_ranks(&column.values))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j - 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Centered ranks and their sum of squares, the reusable half of a
/// Spearman evaluation.
#[derive(Debug, Clone)]
struct CenteredRanks {
    dev: Vec<f64>,
    sum_sq: f64,
}

impl CenteredRanks {
    fn new(values: &[f64]) -> Self {
        let ranks = average_ranks(values);
        let mean = ranks.iter().sum::<f64>() / ranks.len() as f64;
        let dev: Vec<f64> = ranks.iter().map(|r| r - mean).collect();
        let sum_sq = dev.iter().map(|d| d * d).sum();
        Self { dev, sum_sq }
    }

    fn is_degenerate(&self) -> bool {
        self.sum_sq == 0.0
    }

    // sqrt(a*b) rather than sqrt(a)*sqrt(b): keeps R(x, x) at exactly 1 and
    // the result symmetric bit-for-bit.
    fn correlate(&self, other: &Self) -> f64 {
        let cov: f64 = self.dev.iter().zip(&other.dev).map(|(a, b)| a * b).sum();
        (cov / (self.sum_sq * other.sum_sq).sqrt()).clamp(-1.0, 1.0)
    }
}

pub fn spearman(col_k: &FeatureColumn, col_m: &FeatureColumn) -> Result<f64, SelectError> {
    if col_k.len() != col_m.len() {
        return Err(SelectError::LengthMismatch(
            col_k.name.clone(),
            col_m.name.clone(),
        ));
    }
    for c in [col_k, col_m] {
        if c.len() < 2 {
            return Err(SelectError::TooShort(c.name.clone()));
        }
    }
    let rk = CenteredRanks::new(&col_k.values);
    if rk.is_degenerate() {
        return Err(SelectError::DegenerateColumn(col_k.name.clone()));
    }
    let rm = CenteredRanks::new(&col_m.values);
    if rm.is_degenerate() {
        return Err(SelectError::DegenerateColumn(col_m.name.clone()));
    }
    Ok(rk.correlate(&rm))
}

/// Pairwise Spearman coefficients between all columns of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.values[k][m]
    }

    /// Header row and first column both carry the column names.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "feature")?;
        for n in &self.names {
            write!(out, ",{n}")?;
        }
        writeln!(out)?;
        for (name, row) in self.names.iter().zip(&self.values) {
            write!(out, "{name}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn centered_ranks_checked(columns: &[FeatureColumn]) -> Result<Vec<CenteredRanks>, SelectError> {
    let n = columns[0].len();
    for c in columns {
        if c.len() != n {
            return Err(SelectError::LengthMismatch(
                columns[0].name.clone(),
                c.name.clone(),
            ));
        }
        if n < 2 {
            return Err(SelectError::TooShort(c.name.clone()));
        }
    }
    Ok(columns.par_iter().map(|c| CenteredRanks::new(&c.values)).collect())
}

pub fn correlation_matrix<S: Columns>(series: &S) -> Result<CorrelationMatrix, SelectError> {
    let columns = series.columns();
    if columns.len() < 2 {
        return Err(SelectError::TooFewColumns);
    }
    let ranks = centered_ranks_checked(columns)?;
    if let Some(i) = ranks.iter().position(CenteredRanks::is_degenerate) {
        return Err(SelectError::DegenerateColumn(columns[i].name.clone()));
    }

    let d = columns.len();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|k| ((k + 1)..d).map(move |m| (k, m)))
        .collect();
    let coeffs: Vec<f64> = pairs
        .par_iter()
        .map(|&(k, m)| ranks[k].correlate(&ranks[m]))
        .collect();

    let mut values = vec![vec![0.0; d]; d];
    for (k, row) in values.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    for (&(k, m), &r) in pairs.iter().zip(&coeffs) {
        values[k][m] = r;
        values[m][k] = r;
    }
    Ok(CorrelationMatrix {
        names: series.column_names(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub thr_var: f64,
    pub thr_corr: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            thr_var: DEFAULT_THR_VAR,
            thr_corr: DEFAULT_THR_CORR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDrop {
    pub name: String,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDrop {
    pub name: String,
    pub partner: String,
    pub coefficient: f64,
}

/// Every pruning decision together with the statistic behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub kept: Vec<String>,
    pub dropped_variance: Vec<VarianceDrop>,
    pub dropped_correlated: Vec<CorrelationDrop>,
    pub thresholds: Thresholds,
}

impl PruneReport {
    pub fn n_dropped(&self) -> usize {
        self.dropped_variance.len() + self.dropped_correlated.len()
    }
}

/// Indices that survive the variance phase, plus the variance drops.
fn variance_phase(columns: &[FeatureColumn], thr_var: f64) -> Result<(Vec<usize>, Vec<VarianceDrop>), SelectError> {
    let mut survivors = Vec::new();
    let mut dropped = Vec::new();
    for (i, c) in columns.iter().enumerate() {
        let variance = column_variance(c)?;
        if variance < thr_var {
            dropped.push(VarianceDrop {
                name: c.name.clone(),
                variance,
            });
        } else {
            survivors.push(i);
        }
    }
    Ok((survivors, dropped))
}

/// Applies both pruning phases and returns the reduced series with its report.
///
/// A constant column can only reach the correlation phase when `thr_var` is
/// zero; its coefficient is undefined, so it is never correlation-dropped.
pub fn prune<S: Columns>(
    series: &S,
    thr_var: f64,
    thr_corr: f64,
) -> Result<(S, PruneReport), SelectError> {
    if !(thr_var >= 0.0) || !thr_var.is_finite() {
        return Err(SelectError::InvalidThreshold(format!("thr_var = {thr_var}")));
    }
    if !(0.0..=1.0).contains(&thr_corr) {
        return Err(SelectError::InvalidThreshold(format!("thr_corr = {thr_corr}")));
    }
    let columns = series.columns();
    let (survivors, dropped_variance) = variance_phase(columns, thr_var)?;
    if survivors.is_empty() {
        return Err(SelectError::NoFeaturesRemain);
    }

    let mut dropped_correlated = Vec::new();
    let mut dropped = vec![false; survivors.len()];
    if survivors.len() >= 2 {
        let sub: Vec<FeatureColumn> = survivors.iter().map(|&i| columns[i].clone()).collect();
        let ranks = centered_ranks_checked(&sub)?;
        for k in 0..sub.len() {
            if dropped[k] || ranks[k].is_degenerate() {
                continue;
            }
            let row: Vec<(usize, f64)> = ((k + 1)..sub.len())
                .into_par_iter()
                .filter(|&m| !ranks[m].is_degenerate())
                .map(|m| (m, ranks[k].correlate(&ranks[m])))
                .collect();
            for (m, r) in row {
                if !dropped[m] && r.abs() > thr_corr {
                    dropped[m] = true;
                    dropped_correlated.push(CorrelationDrop {
                        name: sub[m].name.clone(),
                        partner: sub[k].name.clone(),
                        coefficient: r,
                    });
                }
            }
        }
    }

    let keep: Vec<usize> = survivors
        .iter()
        .zip(&dropped)
        .filter(|(_, &d)| !d)
        .map(|(&i, _)| i)
        .collect();
    let pruned = series.select_columns(&keep);
    let report = PruneReport {
        kept: pruned.column_names(),
        dropped_variance,
        dropped_correlated,
        thresholds: Thresholds { thr_var, thr_corr },
    };
    Ok((pruned, report))
}

/// Correlation matrix of the columns that pass the variance phase.
pub fn post_variance_correlation<S: Columns>(
    series: &S,
    thr_var: f64,
) -> Result<CorrelationMatrix, SelectError> {
    let (survivors, _) = variance_phase(series.columns(), thr_var)?;
    correlation_matrix(&series.select_columns(&survivors))
}
