//! Information-based preprocessing of event-based PLC time series.
//!
//! The crate covers the full preprocessing chain for multivariate PLC
//! recordings:
//!
//! 1. [`feature_select`]: drop low-variance and redundant (Spearman-correlated)
//!    signals;
//! 2. [`resample`]: forward-fill the event log onto a uniform grid at the PLC
//!    cycle time;
//! 3. [`periodicity`]: find the production cycle time from per-signal
//!    amplitude spectra;
//! 4. [`partition`]: cut the series into cycles at the rising edges of the
//!    strongest cyclic signal.
//!
//! [`synth`] generates cyclic recordings with known ground truth and
//! [`pipeline`] wires all stages together behind the `plcprep` CLI.

pub mod dataset;
pub mod feature_select;
pub mod partition;
pub mod periodicity;
pub mod pipeline;
pub mod resample;
pub mod synth;

pub use dataset::{
    parse_event_csv, write_event_csv, write_uniform_csv, Columns, DatasetError, EventSeries,
    FeatureColumn, UniformSeries,
};
pub use feature_select::{
    column_variance, correlation_matrix, prune, rank_transform, spearman, CorrelationMatrix,
    PruneReport, SelectError,
};
pub use partition::{partition_cycles, CycleSegment, Partition, PartitionError};
pub use periodicity::{
    detect_cycle, filter_spectrum, local_maxima, spectrum, CycleDetection, PeriodicityError,
    SpectralPeak, Spectrum,
};
pub use pipeline::{run_pipeline, AnalysisParams, AnalysisReport, PipelineConfig, PipelineError};
pub use resample::{resample_forward_fill, sampling_frequency, ResampleError};
pub use synth::{generate, GroundTruth, SynthConfig, SynthError};
