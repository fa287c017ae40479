//! End-to-end analysis: prune → resample → detect → partition.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{self, Columns, DatasetError, EventSeries, UniformSeries};
use crate::feature_select::{self, CorrelationMatrix, PruneReport, SelectError};
use crate::partition::{self, Partition, PartitionError, PartitionMethod};
use crate::periodicity::{self, CycleDetection, DetectOptions, PeriodicityError, Spectrum};
use crate::resample::{self, ResampleError};
use crate::synth::SynthError;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const REPORT_FILE: &str = "report.json";
pub const RESAMPLED_FILE: &str = "resampled.csv";
pub const PARTITION_FILE: &str = "partition.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";
pub const SPECTRA_DIR: &str = "spectra";

/// Process exit codes, one per failure class.
pub mod exit_code {
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const DEGENERATE: i32 = 4;
    pub const NO_PERIODICITY: i32 = 5;
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] DatasetError),
    #[error("prune: {0}")]
    Prune(#[from] SelectError),
    #[error("resample: {0}")]
    Resample(#[from] ResampleError),
    #[error("detect: {0}")]
    Detect(#[from] PeriodicityError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("serialize: {0}")]
    Json(#[from] serde_json::Error),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Synth(_) => exit_code::CONFIG,
            Self::Io(_) | Self::Json(_) => exit_code::IO,
            Self::Parse(DatasetError::Io(_)) => exit_code::IO,
            Self::Parse(_) => exit_code::PARSE,
            Self::Detect(PeriodicityError::NoPeriodicity) => exit_code::NO_PERIODICITY,
            Self::Resample(ResampleError::NonPositiveStep(_)) => exit_code::CONFIG,
            Self::Prune(SelectError::InvalidThreshold(_)) => exit_code::CONFIG,
            Self::Detect(PeriodicityError::InvalidParameter(_)) => exit_code::CONFIG,
            Self::Prune(_) | Self::Resample(_) | Self::Detect(_) | Self::Partition(_) => {
                exit_code::DEGENERATE
            }
        }
    }
}

/// Tunable analysis parameters. `step_ms` has no default: it is the PLC
/// cycle time of the recording and must be supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub thr_var: f64,
    pub thr_corr: f64,
    pub step_ms: i64,
    pub top_fraction: f64,
    pub max_period_s: f64,
    pub peaks_per_column: usize,
}

impl AnalysisParams {
    pub fn with_step(step_ms: i64) -> Self {
        Self {
            thr_var: feature_select::DEFAULT_THR_VAR,
            thr_corr: feature_select::DEFAULT_THR_CORR,
            step_ms,
            top_fraction: periodicity::DEFAULT_TOP_FRACTION,
            max_period_s: periodicity::DEFAULT_MAX_PERIOD_S,
            peaks_per_column: periodicity::DEFAULT_PEAKS_PER_COLUMN,
        }
    }

    pub fn detect_options(&self) -> DetectOptions {
        DetectOptions {
            top_fraction: self.top_fraction,
            max_period_s: self.max_period_s,
            peaks_per_column: self.peaks_per_column,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::Config(m));
        if self.step_ms <= 0 {
            return fail(format!("step_ms must be positive, got {}", self.step_ms));
        }
        if !(self.thr_var >= 0.0 && self.thr_var.is_finite()) {
            return fail(format!("thr_var must be >= 0, got {}", self.thr_var));
        }
        if !(0.0..=1.0).contains(&self.thr_corr) {
            return fail(format!("thr_corr must lie in [0, 1], got {}", self.thr_corr));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return fail(format!("top_fraction must lie in (0, 1], got {}", self.top_fraction));
        }
        // finite so the JSON echo stays a number
        if !(self.max_period_s > 0.0 && self.max_period_s.is_finite()) {
            return fail(format!("max_period_s must be positive and finite, got {}", self.max_period_s));
        }
        Ok(())
    }
}

/// Key-value overrides, as read from a TOML file or collected from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub thr_var: Option<f64>,
    pub thr_corr: Option<f64>,
    pub step_ms: Option<i64>,
    pub top_fraction: Option<f64>,
    pub max_period_s: Option<f64>,
    pub peaks_per_column: Option<usize>,
}

impl ParamOverrides {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        toml::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// `self` wins over `base` key by key.
    pub fn over(self, base: Self) -> Self {
        Self {
            thr_var: self.thr_var.or(base.thr_var),
            thr_corr: self.thr_corr.or(base.thr_corr),
            step_ms: self.step_ms.or(base.step_ms),
            top_fraction: self.top_fraction.or(base.top_fraction),
            max_period_s: self.max_period_s.or(base.max_period_s),
            peaks_per_column: self.peaks_per_column.or(base.peaks_per_column),
        }
    }

    pub fn resolve(self) -> Result<AnalysisParams, PipelineError> {
        let step_ms = self
            .step_ms
            .ok_or_else(|| PipelineError::Config("step_ms is required".into()))?;
        let d = AnalysisParams::with_step(step_ms);
        let p = AnalysisParams {
            thr_var: self.thr_var.unwrap_or(d.thr_var),
            thr_corr: self.thr_corr.unwrap_or(d.thr_corr),
            step_ms,
            top_fraction: self.top_fraction.unwrap_or(d.top_fraction),
            max_period_s: self.max_period_s.unwrap_or(d.max_period_s),
            peaks_per_column: self.peaks_per_column.unwrap_or(d.peaks_per_column),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub params: AnalysisParams,
    pub input: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleSummary {
    pub step_ms: i64,
    pub sampling_frequency_hz: f64,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub signal: String,
    pub method: PartitionMethod,
    pub n_cycles: usize,
    pub n_anomalous: usize,
    pub mean_duration_s: Option<f64>,
    pub min_duration_s: Option<f64>,
    pub max_duration_s: Option<f64>,
}

impl PartitionSummary {
    pub fn of(p: &Partition) -> Self {
        let durations: Vec<f64> = p.segments.iter().map(|s| s.duration_s).collect();
        let n = durations.len();
        Self {
            signal: p.signal.clone(),
            method: p.method,
            n_cycles: n,
            n_anomalous: p.n_anomalous(),
            mean_duration_s: (n > 0).then(|| durations.iter().sum::<f64>() / n as f64),
            min_duration_s: durations.iter().copied().reduce(f64::min),
            max_duration_s: durations.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_sha256: String,
    pub config: AnalysisParams,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub prune: PruneReport,
    pub resample: ResampleSummary,
    pub detection: CycleDetection,
    pub partition: PartitionSummary,
    pub provenance: Provenance,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self).map(|mut s| {
            s.push('\n');
            s
        })
    }
}

/// Everything the pipeline computes, before anything touches disk.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub uniform: UniformSeries,
    pub correlation: Option<CorrelationMatrix>,
    pub spectra: Vec<Spectrum>,
    pub partition: Partition,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs all four stages on an in-memory series.
pub fn analyze(
    events: &EventSeries,
    params: &AnalysisParams,
    input_sha256: String,
) -> Result<Analysis, PipelineError> {
    params.validate()?;
    let (pruned, prune_report) = feature_select::prune(events, params.thr_var, params.thr_corr)?;
    // plot-ready matrix of the variance survivors; undefined for < 2 columns
    let correlation = feature_select::post_variance_correlation(events, params.thr_var).ok();

    let uniform = resample::resample_forward_fill(&pruned, params.step_ms)?;
    let (detection, spectra) = periodicity::detect_cycle_with(&uniform, &params.detect_options())?;
    let partition = partition::partition_cycles(&uniform, &detection)?;

    let report = AnalysisReport {
        prune: prune_report,
        resample: ResampleSummary {
            step_ms: uniform.step_ms(),
            sampling_frequency_hz: uniform.sampling_frequency_hz(),
            n_rows: uniform.n_rows(),
        },
        detection,
        partition: PartitionSummary::of(&partition),
        provenance: Provenance {
            input_sha256,
            config: *params,
            tool_version: TOOL_VERSION.to_string(),
        },
    };
    Ok(Analysis {
        report,
        uniform,
        correlation,
        spectra,
        partition,
    })
}

/// File-name-safe version of a column name.
pub fn file_stem_for(column: &str) -> String {
    column
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn write_spectra(spectra: &[Spectrum], dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    for (i, s) in spectra.iter().enumerate() {
        let path = dir.join(format!("{i:03}_{}.csv", file_stem_for(&s.column_name)));
        s.write_csv(std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    Ok(())
}

impl Analysis {
    pub fn write_outputs(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(REPORT_FILE), self.report.to_json()?)?;
        dataset::write_uniform_csv(&self.uniform, dir.join(RESAMPLED_FILE))?;
        write_spectra(&self.spectra, &dir.join(SPECTRA_DIR))?;
        self.partition.write_csv(
            &self.uniform,
            std::io::BufWriter::new(fs::File::create(dir.join(PARTITION_FILE))?),
        )?;
        if let Some(m) = &self.correlation {
            m.write_csv(std::io::BufWriter::new(fs::File::create(dir.join(CORRELATION_FILE))?))?;
        }
        Ok(())
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<AnalysisReport, PipelineError> {
    let bytes = fs::read(&config.input)?;
    let name = config
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let events = dataset::parse_event_csv_reader(bytes.as_slice(), name)?;
    let analysis = analyze(&events, &config.params, sha256_hex(&bytes))?;
    analysis.write_outputs(&config.output_dir)?;
    Ok(analysis.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_flags_win() {
        let file = ParamOverrides::from_toml_str("step_ms = 20\nthr_corr = 0.9\n").unwrap();
        let flags = ParamOverrides {
            thr_corr: Some(0.8),
            ..Default::default()
        };
        let p = flags.over(file).resolve().unwrap();
        assert_eq!(p.step_ms, 20);
        assert_eq!(p.thr_corr, 0.8);
        assert_eq!(p.thr_var, feature_select::DEFAULT_THR_VAR);
    }

    #[test]
    fn config_errors() {
        assert!(ParamOverrides::from_toml_str("nonsense = 1").is_err());
        let e = ParamOverrides::default().resolve().unwrap_err();
        assert_eq!(e.exit_code(), exit_code::CONFIG);
        let e = ParamOverrides {
            step_ms: Some(10),
            top_fraction: Some(0.0),
            ..Default::default()
        }
        .resolve()
        .unwrap_err();
        assert!(matches!(e, PipelineError::Config(_)));
    }

    #[test]
    fn sha_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn exit_codes_distinct() {
        let parse = PipelineError::Parse(DatasetError::EmptyDataset);
        let degenerate = PipelineError::Prune(SelectError::NoFeaturesRemain);
        let none = PipelineError::Detect(PeriodicityError::NoPeriodicity);
        let codes = [parse.exit_code(), degenerate.exit_code(), none.exit_code()];
        assert_eq!(codes, [exit_code::PARSE, exit_code::DEGENERATE, exit_code::NO_PERIODICITY]);
    }

    #[test]
    fn file_stems() {
        assert_eq!(file_stem_for("Sensor 1/a"), "Sensor_1_a");
    }
}
