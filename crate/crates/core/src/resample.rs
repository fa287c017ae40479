//! Forward-fill upscaling of event-based series onto a uniform grid.

use thiserror::Error;

use crate::dataset::{Columns, DatasetError, EventSeries, FeatureColumn, UniformSeries};

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("step must be positive, got {0} ms")]
    NonPositiveStep(i64),
    #[error("empty input series")]
    Empty,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Rows generated per second for a grid step in milliseconds.
pub fn sampling_frequency(step_ms: i64) -> Result<f64, ResampleError> {
    if step_ms <= 0 {
        return Err(ResampleError::NonPositiveStep(step_ms));
    }
    Ok(1000.0 / step_ms as f64)
}

/// Number of grid rows between the first and last event, inclusive.
pub fn grid_len(first_ms: i64, last_ms: i64, step_ms: i64) -> usize {
    ((last_ms - first_ms) / step_ms) as usize + 1
}

/// Sample-and-hold resampling: the row at grid time `g` carries the values of
/// the latest event with timestamp `<= g`. The grid starts at the first event
/// and stops at the last grid point not after the final event.
pub fn resample_forward_fill(events: &EventSeries, step_ms: i64) -> Result<UniformSeries, ResampleError> {
    if step_ms <= 0 {
        return Err(ResampleError::NonPositiveStep(step_ms));
    }
    let ts = events.timestamps();
    let (first, last) = match (ts.first(), ts.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(ResampleError::Empty),
    };
    let n_out = grid_len(first, last, step_ms);

    // source event index for every grid row; shared by all columns
    let mut source = Vec::with_capacity(n_out);
    let mut e = 0;
    for i in 0..n_out {
        let g = first + i as i64 * step_ms;
        while e + 1 < ts.len() && ts[e + 1] <= g {
            e += 1;
        }
        source.push(e);
    }

    let columns = events
        .columns()
        .iter()
        .map(|c| FeatureColumn::new(c.name.clone(), source.iter().map(|&e| c.values[e]).collect()))
        .collect();
    Ok(UniformSeries::new(first, step_ms, columns)?)
}
