//! Cycle partitioning from the strongest cyclic signal.
//!
//! The signal is binarized at its midrange and cut at every rising edge.
//! Spans outside `[0.5 T, 1.5 T]` are flagged anomalous. With fewer than two
//! edges the series falls back to back-to-back windows of length `T`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Columns, UniformSeries};
use crate::periodicity::CycleDetection;

/// Accepted cycle durations, as fractions of the detected cycle time.
pub const PLAUSIBLE_BAND: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("detection has no ranked signals")]
    NoSignal,
    #[error("signal `{0}` not found in series")]
    MissingSignal(String),
    #[error("unpartitionable signal `{0}`: constant values")]
    Unpartitionable(String),
    #[error("cycle time must be positive and finite, got {0}")]
    BadCycleTime(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSegment {
    pub start_index: usize,
    /// Exclusive.
    pub end_index: usize,
    pub duration_s: f64,
    pub anomalous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMethod {
    RisingEdge,
    FixedWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub signal: String,
    pub method: PartitionMethod,
    pub segments: Vec<CycleSegment>,
}

impl Partition {
    pub fn n_anomalous(&self) -> usize {
        self.segments.iter().filter(|s| s.anomalous).count()
    }

    /// Columns: segment_index, start_ms, end_ms, duration_s, anomalous.
    pub fn write_csv<W: Write>(&self, series: &UniformSeries, mut out: W) -> std::io::Result<()> {
        writeln!(out, "segment_index,start_ms,end_ms,duration_s,anomalous")?;
        for (i, s) in self.segments.iter().enumerate() {
            writeln!(
                out,
                "{i},{},{},{},{}",
                series.timestamp(s.start_index),
                series.timestamp(s.end_index),
                s.duration_s,
                s.anomalous
            )?;
        }
        Ok(())
    }
}

/// Row indices `i` where `values[i-1] < threshold <= values[i]`.
pub fn rising_edges(values: &[f64], threshold: f64) -> Vec<usize> {
    (1..values.len())
        .filter(|&i| values[i - 1] < threshold && values[i] >= threshold)
        .collect()
}

/// Partitions using the top-ranked signal of `detection`.
pub fn partition_cycles(
    series: &UniformSeries,
    detection: &CycleDetection,
) -> Result<Partition, PartitionError> {
    let signal = detection
        .ranked_signals
        .first()
        .ok_or(PartitionError::NoSignal)?
        .column_name
        .clone();
    partition_by_signal(series, &signal, detection.cycle_time_s)
}

pub fn partition_by_signal(
    series: &UniformSeries,
    signal: &str,
    cycle_time_s: f64,
) -> Result<Partition, PartitionError> {
    if !(cycle_time_s > 0.0) || !cycle_time_s.is_finite() {
        return Err(PartitionError::BadCycleTime(cycle_time_s));
    }
    let column = series
        .column(signal)
        .ok_or_else(|| PartitionError::MissingSignal(signal.to_string()))?;
    let (min, max) = column
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if min == max {
        return Err(PartitionError::Unpartitionable(signal.to_string()));
    }

    let step_s = series.step_ms() as f64 / 1000.0;
    let duration = |rows: usize| rows as f64 * step_s;
    let (lo, hi) = (PLAUSIBLE_BAND.0 * cycle_time_s, PLAUSIBLE_BAND.1 * cycle_time_s);

    let edges = rising_edges(&column.values, min + (max - min) / 2.0);
    if edges.len() >= 2 {
        let segments = edges
            .windows(2)
            .map(|w| {
                let d = duration(w[1] - w[0]);
                CycleSegment {
                    start_index: w[0],
                    end_index: w[1],
                    duration_s: d,
                    anomalous: d < lo || d > hi,
                }
            })
            .collect();
        return Ok(Partition {
            signal: signal.to_string(),
            method: PartitionMethod::RisingEdge,
            segments,
        });
    }

    let n = series.n_rows();
    let window = ((cycle_time_s / step_s).round() as usize).clamp(1, n);
    let segments = (0..n / window)
        .map(|k| CycleSegment {
            start_index: k * window,
            end_index: (k + 1) * window,
            duration_s: duration(window),
            anomalous: false,
        })
        .collect();
    Ok(Partition {
        signal: signal.to_string(),
        method: PartitionMethod::FixedWindow,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureColumn;
    use proptest::prelude::*;

    fn series(values: Vec<f64>, step_ms: i64) -> UniformSeries {
        UniformSeries::new(0, step_ms, vec![FeatureColumn::new("s", values)]).unwrap()
    }

    fn square(n: usize, period: usize, high: usize) -> Vec<f64> {
        (0..n).map(|i| if i % period < high { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn exact_square_wave() {
        // 900 s at 1 s steps, 90 s period starting mid-low so edges are interior
        let mut v = square(900, 90, 45);
        v.rotate_right(30);
        let p = partition_by_signal(&series(v, 1000), "s", 90.0).unwrap();
        assert_eq!(p.method, PartitionMethod::RisingEdge);
        assert!((9..=10).contains(&p.segments.len()));
        assert!(p.segments.iter().all(|s| s.duration_s == 90.0 && !s.anomalous));
    }

    #[test]
    fn stretched_cycle_is_anomalous() {
        let mut v = Vec::new();
        for len in [90, 90, 200, 90, 90] {
            v.extend((0..len).map(|i| if i < 10 { 1.0 } else { 0.0 }));
        }
        v.push(1.0);
        let p = partition_by_signal(&series(v, 1000), "s", 90.0).unwrap();
        let flags: Vec<bool> = p.segments.iter().map(|s| s.anomalous).collect();
        assert_eq!(flags, vec![false, true, false, false]);
        assert_eq!(p.n_anomalous(), 1);
    }

    #[test]
    fn fallback_fixed_windows() {
        let mut v = vec![0.0; 100];
        v[50] = 1.0;
        let p = partition_by_signal(&series(v, 1000), "s", 30.0).unwrap();
        assert_eq!(p.method, PartitionMethod::FixedWindow);
        assert_eq!(p.segments.len(), 3);
        assert_eq!(p.segments[2].start_index, 60);
        assert!(p.segments.iter().all(|s| !s.anomalous));
    }

    #[test]
    fn errors() {
        let s = series(vec![2.0; 20], 10);
        assert_eq!(
            partition_by_signal(&s, "s", 1.0).unwrap_err(),
            PartitionError::Unpartitionable("s".into())
        );
        assert!(matches!(
            partition_by_signal(&s, "nope", 1.0),
            Err(PartitionError::MissingSignal(_))
        ));
        assert!(partition_by_signal(&s, "s", 0.0).is_err());
    }

    #[test]
    fn csv_output() {
        let v = square(40, 10, 3);
        let s = series(v, 500);
        let p = partition_by_signal(&s, "s", 5.0).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&s, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "segment_index,start_ms,end_ms,duration_s,anomalous\n\
             0,5000,10000,5,false\n1,10000,15000,5,false\n"
        );
    }

    proptest! {
        #[test]
        fn segments_tile_edge_span(
            v in prop::collection::vec(0u8..2, 3..300),
            offset in -100.0f64..100.0,
            t in 1.0f64..50.0,
        ) {
            let vals: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            let s = series(vals.clone(), 100);
            let Ok(p) = partition_by_signal(&s, "s", t) else { return Ok(()); };
            let shifted = series(vals.iter().map(|x| x + offset).collect(), 100);
            prop_assert_eq!(&partition_by_signal(&shifted, "s", t).unwrap(), &p);
            if p.method == PartitionMethod::RisingEdge {
                let first = p.segments[0].start_index;
                let last = p.segments.last().unwrap().end_index;
                for w in p.segments.windows(2) {
                    prop_assert_eq!(w[0].end_index, w[1].start_index);
                }
                let total: f64 = p.segments.iter().map(|s| s.duration_s).sum();
                prop_assert!((total - (last - first) as f64 * 0.1).abs() < 1e-9);
                prop_assert!(p.segments.iter().all(|s| s.start_index < s.end_index));
            }
        }
    }
}
