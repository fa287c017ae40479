use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plcprep_core::dataset::{self, Columns, UniformSeries};
use plcprep_core::feature_select;
use plcprep_core::partition;
use plcprep_core::periodicity::{self, CycleDetection, DetectOptions};
use plcprep_core::pipeline::{self, ParamOverrides, PipelineConfig, PipelineError};
use plcprep_core::resample;
use plcprep_core::synth::{self, SynthConfig};

#[derive(Parser)]
#[command(name = "plcprep", version, about = "Preprocessing of event-based PLC time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: prune, resample, detect, partition.
    Analyze(AnalyzeArgs),
    /// Variance and correlation pruning of an event CSV.
    Prune(PruneArgs),
    /// Forward-fill an event CSV onto a uniform grid.
    Resample(ResampleArgs),
    /// Cycle-time detection on a uniform CSV.
    Detect(DetectArgs),
    /// Cycle partitioning of a uniform CSV.
    Partition(PartitionArgs),
    /// Generate a synthetic event-based PLC dataset.
    Synth(SynthArgs),
}

#[derive(Args, Default)]
struct ParamFlags {
    #[arg(long)]
    thr_var: Option<f64>,
    #[arg(long)]
    thr_corr: Option<f64>,
    #[arg(long)]
    step_ms: Option<i64>,
    #[arg(long)]
    top_fraction: Option<f64>,
    #[arg(long)]
    max_period_s: Option<f64>,
    #[arg(long)]
    peaks_per_column: Option<usize>,
}

impl From<&ParamFlags> for ParamOverrides {
    fn from(f: &ParamFlags) -> Self {
        Self {
            thr_var: f.thr_var,
            thr_corr: f.thr_corr,
            step_ms: f.step_ms,
            top_fraction: f.top_fraction,
            max_period_s: f.max_period_s,
            peaks_per_column: f.peaks_per_column,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// TOML file with parameter keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = feature_select::DEFAULT_THR_VAR)]
    thr_var: f64,
    #[arg(long, default_value_t = feature_select::DEFAULT_THR_CORR)]
    thr_corr: f64,
    /// Write the prune report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the correlation matrix of the variance survivors as CSV.
    #[arg(long)]
    correlation: Option<PathBuf>,
}

#[derive(Args)]
struct ResampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    step_ms: i64,
}

#[derive(Args)]
struct DetectFlags {
    #[arg(long, default_value_t = periodicity::DEFAULT_TOP_FRACTION)]
    top_fraction: f64,
    #[arg(long, default_value_t = periodicity::DEFAULT_MAX_PERIOD_S)]
    max_period_s: f64,
    #[arg(long, default_value_t = periodicity::DEFAULT_PEAKS_PER_COLUMN)]
    peaks_per_column: usize,
}

impl DetectFlags {
    fn options(&self) -> DetectOptions {
        DetectOptions {
            top_fraction: self.top_fraction,
            max_period_s: self.max_period_s,
            peaks_per_column: self.peaks_per_column,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Uniform CSV, e.g. the output of `resample`.
    #[arg(long)]
    input: PathBuf,
    /// Receives detection.json and spectra/*.csv.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    detect: DetectFlags,
}

#[derive(Args)]
struct PartitionArgs {
    /// Uniform CSV, e.g. the output of `resample`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// detection.json from `detect`; detection is rerun when omitted.
    #[arg(long)]
    detection: Option<PathBuf>,
    #[command(flatten)]
    detect: DetectFlags,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Defaults to ground_truth.json next to the CSV.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long, default_value_t = 35)]
    n_features: usize,
    #[arg(long, default_value_t = 17)]
    n_states: usize,
    #[arg(long, default_value_t = 90.0)]
    cycle_time_s: f64,
    #[arg(long, default_value_t = 0.10)]
    noise_fraction: f64,
    #[arg(long, default_value_t = 604_800.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    plc_step_ms: i64,
    #[arg(long, default_value_t = 1)]
    n_constant: usize,
    #[arg(long)]
    anchor_echo: bool,
}

fn read_uniform(path: &Path) -> Result<UniformSeries, PipelineError> {
    Ok(UniformSeries::from_events(&dataset::parse_event_csv(path)?)?)
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), PipelineError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Analyze(a) => {
            let file = match &a.config {
                Some(p) => ParamOverrides::from_file(p)?,
                None => ParamOverrides::default(),
            };
            let params = ParamOverrides::from(&a.params).over(file).resolve()?;
            let report = pipeline::run_pipeline(&PipelineConfig {
                params,
                input: a.input,
                output_dir: a.out_dir.clone(),
            })?;
            let d = &report.detection;
            println!(
                "kept {} features ({} low variance, {} correlated); cycle time {:.3} s (±{:.3} s) from {}; {} cycles, {} anomalous",
                report.prune.kept.len(),
                report.prune.dropped_variance.len(),
                report.prune.dropped_correlated.len(),
                d.cycle_time_s,
                d.period_resolution_s(),
                d.strongest_signal(),
                report.partition.n_cycles,
                report.partition.n_anomalous,
            );
            println!("report written to {}", a.out_dir.join(pipeline::REPORT_FILE).display());
        }
        Command::Prune(a) => {
            let events = dataset::parse_event_csv(&a.input)?;
            let (pruned, report) = feature_select::prune(&events, a.thr_var, a.thr_corr)?;
            dataset::write_event_csv(&pruned, &a.output)?;
            if let Some(p) = &a.report {
                write_json(&report, p)?;
            }
            if let Some(p) = &a.correlation {
                let m = feature_select::post_variance_correlation(&events, a.thr_var)?;
                m.write_csv(BufWriter::new(fs::File::create(p)?))?;
            }
            println!(
                "kept {} of {} features",
                report.kept.len(),
                events.columns().len()
            );
        }
        Command::Resample(a) => {
            let events = dataset::parse_event_csv(&a.input)?;
            let uniform = resample::resample_forward_fill(&events, a.step_ms)?;
            dataset::write_uniform_csv(&uniform, &a.output)?;
            println!(
                "{} rows at {} Hz",
                uniform.n_rows(),
                uniform.sampling_frequency_hz()
            );
        }
        Command::Detect(a) => {
            let uniform = read_uniform(&a.input)?;
            let (detection, spectra) = periodicity::detect_cycle_with(&uniform, &a.detect.options())?;
            fs::create_dir_all(&a.out_dir)?;
            write_json(&detection, &a.out_dir.join("detection.json"))?;
            pipeline::write_spectra(&spectra, &a.out_dir.join(pipeline::SPECTRA_DIR))?;
            println!(
                "cycle time {:.3} s from {}",
                detection.cycle_time_s,
                detection.strongest_signal()
            );
        }
        Command::Partition(a) => {
            let uniform = read_uniform(&a.input)?;
            let detection: CycleDetection = match &a.detection {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => periodicity::detect_cycle_with(&uniform, &a.detect.options())?.0,
            };
            let p = partition::partition_cycles(&uniform, &detection)?;
            p.write_csv(&uniform, BufWriter::new(fs::File::create(&a.output)?))?;
            println!(
                "{} segments ({} anomalous) using {}",
                p.segments.len(),
                p.n_anomalous(),
                p.signal
            );
        }
        Command::Synth(a) => {
            let config = SynthConfig {
                n_features: a.n_features,
                n_states: a.n_states,
                cycle_time_s: a.cycle_time_s,
                noise_fraction: a.noise_fraction,
                duration_s: a.duration_s,
                seed: a.seed,
                plc_step_ms: a.plc_step_ms,
                n_constant: a.n_constant,
                anchor_echo: a.anchor_echo,
            };
            let (series, truth) = synth::generate(&config)?;
            dataset::write_event_csv(&series, &a.out)?;
            let gt_path = a.ground_truth.unwrap_or_else(|| {
                a.out
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join("ground_truth.json")
            });
            write_json(&truth, &gt_path)?;
            println!(
                "{} event rows, {} cycles, {} noisy",
                series.n_rows(),
                truth.n_cycles(),
                truth.noisy_cycles.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
