//! Python bindings for `plcprep-core`.

use std::collections::HashMap;

use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use plcprep_core::dataset::{self, Columns, DatasetError, FeatureColumn};
use plcprep_core::feature_select::{self, SelectError};
use plcprep_core::partition::{self, PartitionError};
use plcprep_core::periodicity::{self, DetectOptions, PeriodicityError};
use plcprep_core::pipeline::{self, AnalysisParams, PipelineError};
use plcprep_core::resample::{self, ResampleError};
use plcprep_core::synth::{self, SynthConfig, SynthError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dataset_err(e: DatasetError) -> PyErr {
    match e {
        DatasetError::Io(_) => PyOSError::new_err(e.to_string()),
        e => value_err(e),
    }
}

macro_rules! to_value_err {
    ($($t:ty),*) => {$(
        impl From<Wrap<$t>> for PyErr {
            fn from(e: Wrap<$t>) -> Self {
                value_err(e.0)
            }
        }
    )*};
}

struct Wrap<E>(E);
to_value_err!(SelectError, ResampleError, PeriodicityError, PartitionError, SynthError);

impl From<Wrap<PipelineError>> for PyErr {
    fn from(e: Wrap<PipelineError>) -> Self {
        match e.0 {
            PipelineError::Io(_) => PyOSError::new_err(e.0.to_string()),
            PipelineError::Parse(d) => dataset_err(d),
            e => value_err(e),
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string_pretty(value).map_err(value_err)
}

fn column_values<S: Columns>(s: &S, name: &str) -> PyResult<Vec<f64>> {
    s.column(name)
        .map(|c| c.values.clone())
        .ok_or_else(|| PyKeyError::new_err(name.to_string()))
}

fn columns_dict<'py, S: Columns>(py: Python<'py>, s: &S) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for c in s.columns() {
        d.set_item(&c.name, &c.values)?;
    }
    Ok(d)
}

fn columns_from_dict(columns: &Bound<'_, PyDict>) -> PyResult<Vec<FeatureColumn>> {
    columns
        .iter()
        .map(|(k, v)| Ok(FeatureColumn::new(k.extract::<String>()?, v.extract::<Vec<f64>>()?)))
        .collect()
}

/// Event-based series: strictly increasing timestamps (ms) and one value per
/// feature column per row.
#[pyclass(name = "EventSeries", module = "plcprep", frozen)]
struct PyEventSeries(dataset::EventSeries);

#[pymethods]
impl PyEventSeries {
    /// `columns` maps feature names to value lists; insertion order is kept.
    #[new]
    #[pyo3(signature = (timestamps, columns, name = "series"))]
    fn new(timestamps: Vec<i64>, columns: &Bound<'_, PyDict>, name: &str) -> PyResult<Self> {
        dataset::EventSeries::new(name, timestamps, columns_from_dict(columns)?)
            .map(Self)
            .map_err(dataset_err)
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        dataset::parse_event_csv(path).map(Self).map_err(dataset_err)
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        dataset::write_event_csv(&self.0, path).map_err(dataset_err)
    }

    #[getter]
    fn name(&self) -> &str {
        self.0.name()
    }

    #[getter]
    fn timestamps(&self) -> Vec<i64> {
        self.0.timestamps().to_vec()
    }

    #[getter]
    fn column_names(&self) -> Vec<String> {
        self.0.column_names().iter().map(|s| s.to_string()).collect()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        column_values(&self.0, name)
    }

    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        columns_dict(py, &self.0)
    }

    fn __len__(&self) -> usize {
        self.0.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "EventSeries(name={:?}, rows={}, columns={})",
            self.0.name(),
            self.0.n_rows(),
            self.0.columns().len()
        )
    }
}

/// Series on a uniform grid `start_ms + i * step_ms`.
#[pyclass(name = "UniformSeries", module = "plcprep", frozen)]
struct PyUniformSeries(dataset::UniformSeries);

#[pymethods]
impl PyUniformSeries {
    #[new]
    fn new(start_ms: i64, step_ms: i64, columns: &Bound<'_, PyDict>) -> PyResult<Self> {
        dataset::UniformSeries::new(start_ms, step_ms, columns_from_dict(columns)?)
            .map(Self)
            .map_err(dataset_err)
    }

    /// Reads a CSV whose timestamps are evenly spaced.
    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        let events = dataset::parse_event_csv(path).map_err(dataset_err)?;
        dataset::UniformSeries::from_events(&events)
            .map(Self)
            .map_err(dataset_err)
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        dataset::write_uniform_csv(&self.0, path).map_err(dataset_err)
    }

    #[getter]
    fn start_ms(&self) -> i64 {
        self.0.start_ms()
    }

    #[getter]
    fn step_ms(&self) -> i64 {
        self.0.step_ms()
    }

    #[getter]
    fn sampling_frequency_hz(&self) -> f64 {
        self.0.sampling_frequency_hz()
    }

    #[getter]
    fn timestamps(&self) -> Vec<i64> {
        self.0.timestamps()
    }

    #[getter]
    fn column_names(&self) -> Vec<String> {
        self.0.column_names().iter().map(|s| s.to_string()).collect()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        column_values(&self.0, name)
    }

    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        columns_dict(py, &self.0)
    }

    #[pyo3(signature = (name = "uniform"))]
    fn to_event_series(&self, name: &str) -> PyEventSeries {
        PyEventSeries(self.0.clone().into_event_series(name))
    }

    fn __len__(&self) -> usize {
        self.0.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "UniformSeries(start_ms={}, step_ms={}, rows={}, columns={})",
            self.0.start_ms(),
            self.0.step_ms(),
            self.0.n_rows(),
            self.0.columns().len()
        )
    }
}

#[derive(FromPyObject)]
enum AnySeries<'py> {
    Event(PyRef<'py, PyEventSeries>),
    Uniform(PyRef<'py, PyUniformSeries>),
}

#[pyclass(name = "PruneReport", module = "plcprep", frozen)]
struct PyPruneReport(feature_select::PruneReport);

#[pymethods]
impl PyPruneReport {
    #[getter]
    fn kept(&self) -> Vec<String> {
        self.0.kept.clone()
    }

    /// `(name, variance)` pairs.
    #[getter]
    fn dropped_variance(&self) -> Vec<(String, f64)> {
        self.0
            .dropped_variance
            .iter()
            .map(|d| (d.name.clone(), d.variance))
            .collect()
    }

    /// `(name, partner, coefficient)` triples.
    #[getter]
    fn dropped_correlated(&self) -> Vec<(String, String, f64)> {
        self.0
            .dropped_correlated
            .iter()
            .map(|d| (d.name.clone(), d.partner.clone(), d.coefficient))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

#[pyclass(name = "Spectrum", module = "plcprep", frozen)]
struct PySpectrum(periodicity::Spectrum);

#[pymethods]
impl PySpectrum {
    #[getter]
    fn column_name(&self) -> &str {
        &self.0.column_name
    }

    #[getter]
    fn bins(&self) -> Vec<usize> {
        self.0.bins.clone()
    }

    #[getter]
    fn frequencies_hz(&self) -> Vec<f64> {
        self.0.frequencies_hz.clone()
    }

    #[getter]
    fn amplitudes(&self) -> Vec<f64> {
        self.0.amplitudes.clone()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "CycleDetection", module = "plcprep", frozen)]
struct PyCycleDetection(periodicity::CycleDetection);

#[pymethods]
impl PyCycleDetection {
    #[getter]
    fn cycle_time_s(&self) -> f64 {
        self.0.cycle_time_s
    }

    #[getter]
    fn frequency_hz(&self) -> f64 {
        self.0.frequency_hz
    }

    #[getter]
    fn bin_width_hz(&self) -> f64 {
        self.0.bin_width_hz
    }

    #[getter]
    fn period_resolution_s(&self) -> f64 {
        self.0.period_resolution_s()
    }

    #[getter]
    fn strongest_signal(&self) -> &str {
        self.0.strongest_signal()
    }

    #[getter]
    fn co_candidates(&self) -> Vec<String> {
        self.0.co_candidates().map(str::to_string).collect()
    }

    /// `(name, amplitude, frequency_hz, period_s, co_candidate)` by amplitude.
    #[getter]
    fn ranked_signals(&self) -> Vec<(String, f64, f64, f64, bool)> {
        self.0
            .ranked_signals
            .iter()
            .map(|r| {
                (r.column_name.clone(), r.amplitude, r.frequency_hz, r.period_s, r.co_candidate)
            })
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

#[pyclass(name = "Partition", module = "plcprep", frozen)]
struct PyPartition(partition::Partition);

#[pymethods]
impl PyPartition {
    #[getter]
    fn signal(&self) -> &str {
        &self.0.signal
    }

    #[getter]
    fn method(&self) -> &str {
        match self.0.method {
            partition::PartitionMethod::RisingEdge => "rising-edge",
            partition::PartitionMethod::FixedWindow => "fixed-window",
        }
    }

    /// `(start_index, end_index, duration_s, anomalous)`; end is exclusive.
    #[getter]
    fn segments(&self) -> Vec<(usize, usize, f64, bool)> {
        self.0
            .segments
            .iter()
            .map(|s| (s.start_index, s.end_index, s.duration_s, s.anomalous))
            .collect()
    }

    #[getter]
    fn n_anomalous(&self) -> usize {
        self.0.n_anomalous()
    }

    fn __len__(&self) -> usize {
        self.0.segments.len()
    }
}

#[pyclass(name = "GroundTruth", module = "plcprep", frozen)]
struct PyGroundTruth(synth::GroundTruth);

#[pymethods]
impl PyGroundTruth {
    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.0.feature_names.clone()
    }

    #[getter]
    fn anchor_name(&self) -> &str {
        self.0.anchor_name()
    }

    #[getter]
    fn constant_names(&self) -> Vec<String> {
        self.0
            .constant_indices
            .iter()
            .map(|&i| self.0.feature_names[i].clone())
            .collect()
    }

    /// `(source, copy)` names of the exact duplicate.
    #[getter]
    fn duplicate(&self) -> (String, String) {
        let d = &self.0.duplicate;
        (self.0.feature_names[d.source].clone(), self.0.feature_names[d.copy].clone())
    }

    #[getter]
    fn cycle_boundaries_ms(&self) -> Vec<i64> {
        self.0.cycle_boundaries_ms.clone()
    }

    #[getter]
    fn noisy_cycles(&self) -> Vec<usize> {
        self.0.noisy_cycles.clone()
    }

    #[getter]
    fn n_cycles(&self) -> usize {
        self.0.n_cycles()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

#[pyfunction]
fn read_event_csv(path: &str) -> PyResult<PyEventSeries> {
    PyEventSeries::read_csv(path)
}

#[pyfunction]
fn column_variance(values: Vec<f64>) -> PyResult<f64> {
    Ok(feature_select::column_variance(&FeatureColumn::new("x", values)).map_err(Wrap)?)
}

#[pyfunction]
fn rank_transform(values: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(feature_select::rank_transform(&FeatureColumn::new("x", values)).map_err(Wrap)?)
}

#[pyfunction]
fn spearman(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    Ok(feature_select::spearman(&FeatureColumn::new("a", a), &FeatureColumn::new("b", b))
        .map_err(Wrap)?)
}

/// Returns `(names, matrix)` with the matrix as nested lists.
#[pyfunction]
fn correlation_matrix(series: AnySeries<'_>) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let m = match &series {
        AnySeries::Event(s) => feature_select::correlation_matrix(&s.0),
        AnySeries::Uniform(s) => feature_select::correlation_matrix(&s.0),
    }
    .map_err(Wrap)?;
    Ok((m.names, m.values))
}

/// Returns the pruned series (same kind as the input) and the report.
#[pyfunction]
#[pyo3(signature = (series, thr_var = feature_select::DEFAULT_THR_VAR, thr_corr = feature_select::DEFAULT_THR_CORR))]
fn prune(
    py: Python<'_>,
    series: AnySeries<'_>,
    thr_var: f64,
    thr_corr: f64,
) -> PyResult<(Py<PyAny>, PyPruneReport)> {
    Ok(match series {
        AnySeries::Event(s) => {
            let (kept, report) = feature_select::prune(&s.0, thr_var, thr_corr).map_err(Wrap)?;
            (Py::new(py, PyEventSeries(kept))?.into_any(), PyPruneReport(report))
        }
        AnySeries::Uniform(s) => {
            let (kept, report) = feature_select::prune(&s.0, thr_var, thr_corr).map_err(Wrap)?;
            (Py::new(py, PyUniformSeries(kept))?.into_any(), PyPruneReport(report))
        }
    })
}

#[pyfunction]
fn sampling_frequency(step_ms: i64) -> PyResult<f64> {
    Ok(resample::sampling_frequency(step_ms).map_err(Wrap)?)
}

#[pyfunction]
fn resample_forward_fill(series: &PyEventSeries, step_ms: i64) -> PyResult<PyUniformSeries> {
    Ok(PyUniformSeries(
        resample::resample_forward_fill(&series.0, step_ms).map_err(Wrap)?,
    ))
}

/// One-sided amplitude spectrum of `values` sampled at `f_hat` Hz.
#[pyfunction]
#[pyo3(signature = (values, f_hat, name = "x"))]
fn spectrum(values: Vec<f64>, f_hat: f64, name: &str) -> PyResult<PySpectrum> {
    Ok(PySpectrum(
        periodicity::spectrum(&FeatureColumn::new(name, values), f_hat).map_err(Wrap)?,
    ))
}

/// Returns the detection and the unfiltered spectrum of every column.
#[pyfunction]
#[pyo3(signature = (
    series,
    top_fraction = periodicity::DEFAULT_TOP_FRACTION,
    max_period_s = periodicity::DEFAULT_MAX_PERIOD_S,
    peaks_per_column = periodicity::DEFAULT_PEAKS_PER_COLUMN,
))]
fn detect_cycle(
    series: &PyUniformSeries,
    top_fraction: f64,
    max_period_s: f64,
    peaks_per_column: usize,
) -> PyResult<(PyCycleDetection, Vec<PySpectrum>)> {
    let opts = DetectOptions { top_fraction, max_period_s, peaks_per_column };
    let (d, spectra) = periodicity::detect_cycle_with(&series.0, &opts).map_err(Wrap)?;
    Ok((PyCycleDetection(d), spectra.into_iter().map(PySpectrum).collect()))
}

#[pyfunction]
fn partition_cycles(series: &PyUniformSeries, detection: &PyCycleDetection) -> PyResult<PyPartition> {
    Ok(PyPartition(
        partition::partition_cycles(&series.0, &detection.0).map_err(Wrap)?,
    ))
}

/// Synthetic cyclic dataset; keyword arguments override the defaults.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn generate(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<(PyEventSeries, PyGroundTruth)> {
    let mut c = SynthConfig::default();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            match key.as_str() {
                "n_features" => c.n_features = v.extract()?,
                "n_states" => c.n_states = v.extract()?,
                "cycle_time_s" => c.cycle_time_s = v.extract()?,
                "noise_fraction" => c.noise_fraction = v.extract()?,
                "duration_s" => c.duration_s = v.extract()?,
                "seed" => c.seed = v.extract()?,
                "plc_step_ms" => c.plc_step_ms = v.extract()?,
                "n_constant" => c.n_constant = v.extract()?,
                "anchor_echo" => c.anchor_echo = v.extract()?,
                _ => return Err(PyKeyError::new_err(format!("unknown option `{key}`"))),
            }
        }
    }
    let (series, truth) = synth::generate(&c).map_err(Wrap)?;
    Ok((PyEventSeries(series), PyGroundTruth(truth)))
}

/// Full pipeline on an event series; returns the JSON report.
#[pyfunction]
#[pyo3(signature = (series, step_ms, **overrides))]
fn analyze(
    series: &PyEventSeries,
    step_ms: i64,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<String> {
    let mut p = AnalysisParams::with_step(step_ms);
    if let Some(kw) = overrides {
        let kw: HashMap<String, Bound<'_, PyAny>> = kw.extract()?;
        for (key, v) in kw {
            match key.as_str() {
                "thr_var" => p.thr_var = v.extract()?,
                "thr_corr" => p.thr_corr = v.extract()?,
                "top_fraction" => p.top_fraction = v.extract()?,
                "max_period_s" => p.max_period_s = v.extract()?,
                "peaks_per_column" => p.peaks_per_column = v.extract()?,
                _ => return Err(PyKeyError::new_err(format!("unknown option `{key}`"))),
            }
        }
    }
    p.validate().map_err(Wrap)?;
    let a = pipeline::analyze(&series.0, &p, String::new()).map_err(Wrap)?;
    a.report.to_json().map_err(value_err)
}

#[pymodule]
fn plcprep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEventSeries>()?;
    m.add_class::<PyUniformSeries>()?;
    m.add_class::<PyPruneReport>()?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyCycleDetection>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyGroundTruth>()?;
    m.add_function(wrap_pyfunction!(read_event_csv, m)?)?;
    m.add_function(wrap_pyfunction!(column_variance, m)?)?;
    m.add_function(wrap_pyfunction!(rank_transform, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(prune, m)?)?;
    m.add_function(wrap_pyfunction!(sampling_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(resample_forward_fill, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(detect_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(partition_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
