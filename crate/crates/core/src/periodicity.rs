//! Spectral cycle-time detection.
//!
//! Each uniform column is mean-centred and transformed with a real-input DFT.
//! The one-sided amplitude spectrum is cut below `1 / max_period_s`, reduced
//! to its top `top_fraction` amplitudes and scanned for local maxima. The
//! production cycle time is the inverse frequency of the strongest surviving
//! peak over all columns.

use std::cmp::Ordering;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Columns, FeatureColumn, UniformSeries};

pub const DEFAULT_TOP_FRACTION: f64 = 0.30;
pub const DEFAULT_MAX_PERIOD_S: f64 = 3600.0;
/// Peaks retained per column in a [`CycleDetection`].
pub const DEFAULT_PEAKS_PER_COLUMN: usize = 10;
/// Relative amplitude band for co-candidate strongest signals.
pub const CO_CANDIDATE_BAND: f64 = 0.01;
pub const MIN_SPECTRUM_LEN: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum PeriodicityError {
    #[error("column `{name}` has {len} samples, need at least {MIN_SPECTRUM_LEN}")]
    TooShort { name: String, len: usize },
    #[error("sampling frequency must be positive, got {0}")]
    BadSamplingFrequency(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no surviving bins in spectrum of `{0}`")]
    NoSurvivingBins(String),
    #[error("series has no columns")]
    NoColumns,
    #[error("no periodicity detected")]
    NoPeriodicity,
}

/// One-sided amplitude spectrum of a column, DC excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub column_name: String,
    /// Original DFT bin index of every entry; adjacency is judged on these.
    pub bins: Vec<usize>,
    pub frequencies_hz: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    fn subset(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        Self {
            column_name: self.column_name.clone(),
            bins: idx.iter().map(|&i| self.bins[i]).collect(),
            frequencies_hz: idx.iter().map(|&i| self.frequencies_hz[i]).collect(),
            amplitudes: idx.iter().map(|&i| self.amplitudes[i]).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "frequency_hz,amplitude")?;
        for (f, a) in self.frequencies_hz.iter().zip(&self.amplitudes) {
            writeln!(out, "{f},{a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub column_name: String,
    pub frequency_hz: f64,
    pub amplitude: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSignal {
    pub column_name: String,
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub period_s: f64,
    /// Within [`CO_CANDIDATE_BAND`] of the strongest signal's amplitude.
    pub co_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDetection {
    pub cycle_time_s: f64,
    pub frequency_hz: f64,
    /// Spectral resolution `f_hat / n`.
    pub bin_width_hz: f64,
    pub ranked_signals: Vec<RankedSignal>,
    pub peaks: Vec<SpectralPeak>,
}

impl CycleDetection {
    pub fn strongest_signal(&self) -> &str {
        &self.ranked_signals[0].column_name
    }

    pub fn co_candidates(&self) -> impl Iterator<Item = &str> {
        self.ranked_signals
            .iter()
            .filter(|s| s.co_candidate)
            .map(|s| s.column_name.as_str())
    }

    /// Period resolution around the detected cycle, `T^2 * bin_width`.
    pub fn period_resolution_s(&self) -> f64 {
        self.cycle_time_s * self.cycle_time_s * self.bin_width_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub top_fraction: f64,
    pub max_period_s: f64,
    pub peaks_per_column: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            top_fraction: DEFAULT_TOP_FRACTION,
            max_period_s: DEFAULT_MAX_PERIOD_S,
            peaks_per_column: DEFAULT_PEAKS_PER_COLUMN,
        }
    }
}

fn check_filter_params(top_fraction: f64, max_period_s: f64) -> Result<(), PeriodicityError> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(PeriodicityError::InvalidParameter(format!(
            "top_fraction must lie in (0, 1], got {top_fraction}"
        )));
    }
    if !(max_period_s > 0.0) {
        return Err(PeriodicityError::InvalidParameter(format!(
            "max_period_s must be positive, got {max_period_s}"
        )));
    }
    Ok(())
}

fn spectrum_with(
    fft: &Arc<dyn Fft<f64>>,
    column: &FeatureColumn,
    f_hat: f64,
) -> Spectrum {
    let n = column.len();
    let half = n / 2;
    let bins: Vec<usize> = (1..=half).collect();
    let frequencies_hz = bins.iter().map(|&k| k as f64 * f_hat / n as f64).collect();

    let (min, max) = column
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let amplitudes = if min == max {
        vec![0.0; half]
    } else {
        let mean = column.values.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = column
            .values
            .iter()
            .map(|&v| Complex::new(v - mean, 0.0))
            .collect();
        fft.process(&mut buf);
        bins.iter().map(|&k| 2.0 * buf[k].norm() / n as f64).collect()
    };

    Spectrum {
        column_name: column.name.clone(),
        bins,
        frequencies_hz,
        amplitudes,
    }
}

fn check_column(column: &FeatureColumn, f_hat: f64) -> Result<(), PeriodicityError> {
    if column.len() < MIN_SPECTRUM_LEN {
        return Err(PeriodicityError::TooShort {
            name: column.name.clone(),
            len: column.len(),
        });
    }
    if !(f_hat > 0.0) || !f_hat.is_finite() {
        return Err(PeriodicityError::BadSamplingFrequency(f_hat));
    }
    Ok(())
}

/// Amplitude spectrum of one column sampled at `f_hat` Hz: bins `1..=n/2`,
/// amplitude `2|X_k|/n`, frequency `k * f_hat / n`.
pub fn spectrum(column: &FeatureColumn, f_hat: f64) -> Result<Spectrum, PeriodicityError> {
    check_column(column, f_hat)?;
    let fft = FftPlanner::new().plan_fft_forward(column.len());
    Ok(spectrum_with(&fft, column, f_hat))
}

/// Drops bins slower than `1 / max_period_s`, then keeps the
/// `ceil(top_fraction * n)` strongest of the rest (ties at the cut survive).
pub fn filter_spectrum(
    spec: &Spectrum,
    top_fraction: f64,
    max_period_s: f64,
) -> Result<Spectrum, PeriodicityError> {
    check_filter_params(top_fraction, max_period_s)?;
    let min_freq = 1.0 / max_period_s;
    let low_cut = spec.subset(|i| spec.frequencies_hz[i] >= min_freq);
    if low_cut.is_empty() {
        return Err(PeriodicityError::NoSurvivingBins(spec.column_name.clone()));
    }

    let n = low_cut.len();
    // 1e-9 absorbs products like 0.3 * 10 = 3.0000000000000004
    let keep = ((top_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut sorted = low_cut.amplitudes.clone();
    let (_, &mut threshold, _) =
        sorted.select_nth_unstable_by(n - keep, |a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(low_cut.subset(|i| low_cut.amplitudes[i] >= threshold))
}

/// Bins strictly above their neighbours inside each run of consecutive
/// surviving bins, strongest first. Run ends compare against their single
/// neighbour; an isolated bin counts as a peak.
pub fn local_maxima(spec: &Spectrum) -> Vec<SpectralPeak> {
    let n = spec.len();
    let amp = &spec.amplitudes;
    let adjacent = |i: usize, j: usize| spec.bins[j] == spec.bins[i] + 1;
    let mut peaks: Vec<SpectralPeak> = (0..n)
        .filter(|&i| {
            let left_ok = i == 0 || !adjacent(i - 1, i) || amp[i] > amp[i - 1];
            let right_ok = i + 1 == n || !adjacent(i, i + 1) || amp[i] > amp[i + 1];
            left_ok && right_ok
        })
        .map(|i| SpectralPeak {
            column_name: spec.column_name.clone(),
            frequency_hz: spec.frequencies_hz[i],
            amplitude: amp[i],
            period_s: 1.0 / spec.frequencies_hz[i],
        })
        .collect();
    peaks.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap_or(Ordering::Equal));
    peaks
}

/// Spectra of every column, computed in parallel with one shared FFT plan.
pub fn series_spectra(series: &UniformSeries) -> Result<Vec<Spectrum>, PeriodicityError> {
    let f_hat = series.sampling_frequency_hz();
    let columns = series.columns();
    if columns.is_empty() {
        return Err(PeriodicityError::NoColumns);
    }
    for c in columns {
        check_column(c, f_hat)?;
    }
    let fft = FftPlanner::new().plan_fft_forward(series.n_rows());
    Ok(columns
        .par_iter()
        .map(|c| spectrum_with(&fft, c, f_hat))
        .collect())
}

pub fn detect_cycle(
    series: &UniformSeries,
    top_fraction: f64,
    max_period_s: f64,
) -> Result<CycleDetection, PeriodicityError> {
    let options = DetectOptions {
        top_fraction,
        max_period_s,
        ..DetectOptions::default()
    };
    detect_cycle_with(series, &options).map(|(d, _)| d)
}

/// Full detection; also returns the unfiltered per-column spectra for export.
pub fn detect_cycle_with(
    series: &UniformSeries,
    options: &DetectOptions,
) -> Result<(CycleDetection, Vec<Spectrum>), PeriodicityError> {
    check_filter_params(options.top_fraction, options.max_period_s)?;
    let spectra = series_spectra(series)?;

    let per_column: Vec<Vec<SpectralPeak>> = spectra
        .par_iter()
        .map(|s| match filter_spectrum(s, options.top_fraction, options.max_period_s) {
            Ok(filtered) => local_maxima(&filtered),
            Err(_) => Vec::new(),
        })
        .collect();

    let mut ranked: Vec<RankedSignal> = per_column
        .iter()
        .filter_map(|peaks| peaks.first())
        .map(|p| RankedSignal {
            column_name: p.column_name.clone(),
            amplitude: p.amplitude,
            frequency_hz: p.frequency_hz,
            period_s: p.period_s,
            co_candidate: false,
        })
        .collect();
    // stable: equal amplitudes keep column order
    ranked.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap_or(Ordering::Equal));
    let best = ranked.first().ok_or(PeriodicityError::NoPeriodicity)?.clone();
    for r in &mut ranked {
        r.co_candidate = r.amplitude >= best.amplitude * (1.0 - CO_CANDIDATE_BAND);
    }

    let mut peaks: Vec<SpectralPeak> = per_column
        .into_iter()
        .flat_map(|p| p.into_iter().take(options.peaks_per_column))
        .collect();
    peaks.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap_or(Ordering::Equal));

    let detection = CycleDetection {
        cycle_time_s: best.period_s,
        frequency_hz: best.frequency_hz,
        bin_width_hz: series.sampling_frequency_hz() / series.n_rows() as f64,
        ranked_signals: ranked,
        peaks,
    };
    Ok((detection, spectra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spec_from(amps: &[f64]) -> Spectrum {
        Spectrum {
            column_name: "s".into(),
            bins: (1..=amps.len()).collect(),
            frequencies_hz: (1..=amps.len()).map(|k| k as f64).collect(),
            amplitudes: amps.to_vec(),
        }
    }

    fn tone(n: usize, f_hat: f64, parts: &[(f64, f64)]) -> FeatureColumn {
        let values = (0..n)
            .map(|i| {
                let t = i as f64 / f_hat;
                parts.iter().map(|&(p, a)| a * (2.0 * PI * t / p).cos()).sum()
            })
            .collect();
        FeatureColumn::new("tone", values)
    }

    #[test]
    fn constant_column_is_flat() {
        let s = spectrum(&FeatureColumn::new("c", vec![3.7; 64]), 1.0).unwrap();
        assert_eq!(s.len(), 32);
        assert!(s.amplitudes.iter().all(|&a| a < 1e-9));
        assert!(local_maxima(&s).is_empty());
    }

    #[test]
    fn short_column_rejected() {
        assert!(matches!(
            spectrum(&FeatureColumn::new("c", vec![1.0; 7]), 1.0),
            Err(PeriodicityError::TooShort { len: 7, .. })
        ));
        assert!(spectrum(&FeatureColumn::new("c", vec![1.0; 8]), 0.0).is_err());
    }

    #[test]
    fn pure_cosine_single_bin() {
        let s = spectrum(&tone(7200, 1.0, &[(90.0, 1.0)]), 1.0).unwrap();
        let (imax, &amax) = s
            .amplitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((s.frequencies_hz[imax] - 1.0 / 90.0).abs() < 1e-12);
        assert!((amax - 1.0).abs() < 1e-9);
        let rest = s
            .amplitudes
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != imax)
            .fold(0.0f64, |m, (_, &a)| m.max(a));
        assert!(rest < 1e-9);
    }

    #[test]
    fn two_tones_two_peaks() {
        let s = spectrum(&tone(7200, 1.0, &[(90.0, 1.0), (30.0, 0.5)]), 1.0).unwrap();
        let f = filter_spectrum(&s, 0.3, f64::INFINITY).unwrap();
        let peaks: Vec<_> = local_maxima(&f).into_iter().filter(|p| p.amplitude > 1e-6).collect();
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0].period_s - 90.0).abs() < 1e-9);
        assert!((peaks[1].period_s - 30.0).abs() < 1e-9);
        assert!((peaks[0].amplitude / peaks[1].amplitude - 2.0).abs() < 1e-9);
    }

    #[test]
    fn filter_disabled_is_identity() {
        let s = spec_from(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        assert_eq!(filter_spectrum(&s, 1.0, f64::INFINITY).unwrap(), s);
    }

    #[test]
    fn filter_keeps_top_thirty_percent() {
        let amps: Vec<f64> = (1..=10).map(f64::from).collect();
        let f = filter_spectrum(&spec_from(&amps), 0.3, f64::INFINITY).unwrap();
        assert_eq!(f.amplitudes, vec![8.0, 9.0, 10.0]);
    }

    #[test]
    fn low_frequency_cut_precedes_quantile() {
        // bin 0 is a 2 h period with a huge amplitude
        let s = Spectrum {
            column_name: "s".into(),
            bins: vec![1, 2, 3, 4],
            frequencies_hz: vec![1.0 / 7200.0, 1.0 / 90.0, 1.0 / 45.0, 1.0 / 30.0],
            amplitudes: vec![100.0, 5.0, 1.0, 2.0],
        };
        let f = filter_spectrum(&s, 0.3, 3600.0).unwrap();
        assert_eq!(f.bins, vec![2]);
        assert!(matches!(
            filter_spectrum(&s, 0.3, 1.0),
            Err(PeriodicityError::NoSurvivingBins(_))
        ));
        assert!(filter_spectrum(&s, 0.0, 10.0).is_err());
    }

    #[test]
    fn local_maxima_examples() {
        let p = local_maxima(&spec_from(&[1.0, 3.0, 1.0]));
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].frequency_hz, 2.0);
        let p = local_maxima(&spec_from(&[5.0, 1.0, 1.0, 1.0]));
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].frequency_hz, 1.0);
        assert!(local_maxima(&spec_from(&[1.0, 2.0, 2.0, 1.0])).is_empty());
    }

    #[test]
    fn local_maxima_respects_gaps() {
        let s = Spectrum {
            column_name: "s".into(),
            bins: vec![1, 2, 5, 6],
            frequencies_hz: vec![1.0, 2.0, 5.0, 6.0],
            amplitudes: vec![1.0, 4.0, 3.0, 2.0],
        };
        let freqs: Vec<f64> = local_maxima(&s).iter().map(|p| p.frequency_hz).collect();
        assert_eq!(freqs, vec![2.0, 5.0]);
    }

    fn square(n: usize, period_rows: usize) -> Vec<f64> {
        (0..n)
            .map(|i| if i % period_rows < period_rows / 2 { 1.0 } else { 0.0 })
            .collect()
    }

    fn autocorr_best_lag(v: &[f64], min_lag: usize, max_lag: usize) -> usize {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (min_lag..=max_lag)
            .max_by(|&a, &b| {
                let ac = |lag: usize| -> f64 {
                    (0..v.len() - lag).map(|i| (v[i] - mean) * (v[i + lag] - mean)).sum::<f64>()
                        / (v.len() - lag) as f64
                };
                ac(a).partial_cmp(&ac(b)).unwrap()
            })
            .unwrap()
    }

    #[test]
    fn square_wave_plus_flat_column() {
        let n = 3600;
        let wave = square(n, 90);
        assert_eq!(autocorr_best_lag(&wave, 30, 150), 90);
        let series = UniformSeries::new(
            0,
            1000,
            vec![
                FeatureColumn::new("wave", wave),
                FeatureColumn::new("flat", vec![0.25; n]),
            ],
        )
        .unwrap();
        let d = detect_cycle(&series, 0.3, 3600.0).unwrap();
        assert_eq!(d.ranked_signals.len(), 1);
        assert_eq!(d.strongest_signal(), "wave");
        assert!((1.0 / d.cycle_time_s - 1.0 / 90.0).abs() <= d.bin_width_hz);
    }

    #[test]
    fn all_flat_means_no_periodicity() {
        let series =
            UniformSeries::new(0, 10, vec![FeatureColumn::new("flat", vec![1.0; 100])]).unwrap();
        assert_eq!(
            detect_cycle(&series, 0.3, 3600.0).unwrap_err(),
            PeriodicityError::NoPeriodicity
        );
    }

    #[test]
    fn co_candidates_flag_equal_signals() {
        let n = 1800;
        let a = square(n, 60);
        let mut b = a.clone();
        b.rotate_right(15);
        let series = UniformSeries::new(
            0,
            1000,
            vec![FeatureColumn::new("a", a), FeatureColumn::new("b", b)],
        )
        .unwrap();
        let d = detect_cycle(&series, 0.3, 3600.0).unwrap();
        let co: Vec<&str> = d.co_candidates().collect();
        assert_eq!(co, vec!["a", "b"]);
    }

    proptest! {
        #[test]
        fn scaling_keeps_peak_bins(
            v in prop::collection::vec(-5.0f64..5.0, 16..80),
            scale in 0.1f64..50.0,
        ) {
            let c = FeatureColumn::new("c", v.clone());
            let cs = FeatureColumn::new("c", v.iter().map(|x| x * scale).collect());
            let a = local_maxima(&spectrum(&c, 2.0).unwrap());
            let b = local_maxima(&spectrum(&cs, 2.0).unwrap());
            let mut fa: Vec<u64> = a.iter().filter(|p| p.amplitude > 1e-9).map(|p| p.frequency_hz.to_bits()).collect();
            let mut fb: Vec<u64> = b.iter().filter(|p| p.amplitude > 1e-9 * scale).map(|p| p.frequency_hz.to_bits()).collect();
            fa.sort();
            fb.sort();
            prop_assert_eq!(fa, fb);
            for p in &a {
                if let Some(q) = b.iter().find(|q| q.frequency_hz == p.frequency_hz) {
                    prop_assert!((q.amplitude - p.amplitude * scale).abs() <= 1e-9 * (1.0 + q.amplitude));
                }
            }
        }

        #[test]
        fn filter_is_subset_and_low_cut_idempotent(
            amps in prop::collection::vec(0.0f64..10.0, 1..60),
            top in 0.05f64..=1.0,
            max_period in 0.05f64..2.0,
        ) {
            let s = spec_from(&amps);
            if let Ok(f) = filter_spectrum(&s, top, max_period) {
                prop_assert!(f.bins.iter().all(|b| s.bins.contains(b)));
                prop_assert!(f.len() >= 1);
                // second pass can only shrink further
                let g = filter_spectrum(&f, top, max_period).unwrap();
                prop_assert!(g.bins.iter().all(|b| f.bins.contains(b)));
                // the low-frequency cut alone is idempotent
                let cut = filter_spectrum(&s, 1.0, max_period).unwrap();
                prop_assert_eq!(filter_spectrum(&cut, 1.0, max_period).unwrap(), cut);
            }
        }
    }
}
