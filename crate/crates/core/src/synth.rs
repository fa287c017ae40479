//! Synthetic event-based PLC recordings with known ground truth.
//!
//! A fixed state machine walks through `n_states` states per cycle. Every
//! feature maps the current state to a value:
//!
//! * the anchor is high during the first half of the cycle, so it rises at
//!   every cycle start and owns the strongest fundamental;
//! * an optional echo repeats the anchor a quarter cycle later (same spectrum,
//!   low correlation);
//! * a level feature encodes the state index, so every transition is an event;
//! * pattern features are short high runs (at most a third of the cycle) at
//!   different phases;
//! * constant features never change and the last feature copies another.
//!
//! Noise follows the "acyclic activity" notion: a noisy cycle gets its dwell
//! times jittered by up to ±10% and one boolean feature inverted from a random
//! instant until the end of the current state.
//!
//! Randomness comes from a `ChaCha8Rng` seeded with `seed`, so output is
//! identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EventSeries, FeatureColumn};

const DWELL_JITTER: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("infeasible dwell allocation: {0}")]
    InfeasibleDwell(String),
    #[error("duration {duration_s} s holds no complete {cycle_time_s} s cycle")]
    NoCompleteCycle { duration_s: f64, cycle_time_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_features: usize,
    pub n_states: usize,
    pub cycle_time_s: f64,
    pub noise_fraction: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub plc_step_ms: i64,
    /// Features that never change; the first is the variance-prune target.
    pub n_constant: usize,
    /// Adds a phase-shifted copy of the anchor with an identical spectrum.
    pub anchor_echo: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_features: 35,
            n_states: 17,
            cycle_time_s: 90.0,
            noise_fraction: 0.10,
            duration_s: 7.0 * 24.0 * 3600.0,
            seed: 0,
            plc_step_ms: 20,
            n_constant: 1,
            anchor_echo: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub source: usize,
    pub copy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub feature_names: Vec<String>,
    pub anchor_index: usize,
    pub anchor_echo_index: Option<usize>,
    pub level_index: Option<usize>,
    pub constant_indices: Vec<usize>,
    pub duplicate: DuplicatePair,
    /// Start of every generated cycle plus the end of the last one.
    pub cycle_boundaries_ms: Vec<i64>,
    pub noisy_cycles: Vec<usize>,
    pub dwell_ticks: Vec<i64>,
    pub config: SynthConfig,
}

impl GroundTruth {
    pub fn n_cycles(&self) -> usize {
        self.cycle_boundaries_ms.len().saturating_sub(1)
    }

    pub fn anchor_name(&self) -> &str {
        &self.feature_names[self.anchor_index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Anchor,
    Echo { shift: usize },
    Level,
    Pattern { phase: usize, len: usize },
    Constant(f64),
    Copy(usize),
}

#[derive(Debug, Clone)]
struct Layout {
    roles: Vec<Role>,
    n_states: usize,
}

impl Layout {
    fn new(cfg: &SynthConfig) -> Self {
        let n = cfg.n_states;
        let mut roles = vec![Role::Anchor];
        if cfg.anchor_echo {
            roles.push(Role::Echo {
                shift: (n / 4).max(1),
            });
        }
        let free = cfg.n_features - roles.len() - cfg.n_constant - 1;
        if free > 0 {
            roles.push(Role::Level);
        }
        let max_len = (n / 3).max(1);
        for j in 0..free.saturating_sub(1) {
            roles.push(Role::Pattern {
                phase: (j / max_len + (j % max_len) * 5) % n,
                len: 1 + j % max_len,
            });
        }
        for c in 0..cfg.n_constant {
            roles.push(Role::Constant(c as f64));
        }
        let source = roles
            .iter()
            .position(|r| matches!(r, Role::Pattern { .. }))
            .or_else(|| roles.iter().position(|r| *r == Role::Level))
            .unwrap_or(0);
        roles.push(Role::Copy(source));
        Self { roles, n_states: n }
    }

    fn index_of(&self, pred: impl Fn(&Role) -> bool) -> Option<usize> {
        self.roles.iter().position(pred)
    }

    fn is_boolean_signal(&self, f: usize) -> bool {
        matches!(
            self.roles[f],
            Role::Anchor | Role::Echo { .. } | Role::Pattern { .. }
        )
    }

    fn base_value(&self, f: usize, state: usize) -> f64 {
        let n = self.n_states;
        let half = n / 2;
        let on = |b: bool| if b { 1.0 } else { 0.0 };
        match self.roles[f] {
            Role::Anchor => on(state < half),
            Role::Echo { shift } => on((state + n - shift) % n < half),
            Role::Level => state as f64 / (n - 1) as f64,
            Role::Pattern { phase, len } => on((state + n - phase) % n < len),
            Role::Constant(v) => v,
            Role::Copy(src) => self.base_value(src, state),
        }
    }

    fn values(&self, state: usize, flipped: Option<usize>) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.roles.len()).map(|f| self.base_value(f, state)).collect();
        if let Some(f) = flipped {
            v[f] = 1.0 - v[f];
        }
        for (f, role) in self.roles.iter().enumerate() {
            if let Role::Copy(src) = *role {
                v[f] = v[src];
            }
        }
        v
    }
}

fn validate(cfg: &SynthConfig) -> Result<(i64, Vec<i64>), SynthError> {
    let bad = |m: String| Err(SynthError::InvalidConfig(m));
    if cfg.n_states < 2 {
        return bad(format!("n_states must be >= 2, got {}", cfg.n_states));
    }
    if cfg.n_constant < 1 {
        return bad("n_constant must be >= 1".into());
    }
    let needed = 2 + cfg.n_constant + usize::from(cfg.anchor_echo);
    if cfg.n_features < needed {
        return bad(format!(
            "n_features must be >= {needed} for this layout, got {}",
            cfg.n_features
        ));
    }
    if !(0.0..=1.0).contains(&cfg.noise_fraction) {
        return bad(format!("noise_fraction must lie in [0, 1], got {}", cfg.noise_fraction));
    }
    if cfg.plc_step_ms <= 0 {
        return bad(format!("plc_step_ms must be positive, got {}", cfg.plc_step_ms));
    }
    if !(cfg.duration_s > 0.0) || !cfg.duration_s.is_finite() {
        return bad(format!("duration_s must be positive, got {}", cfg.duration_s));
    }
    if !(cfg.cycle_time_s > 0.0) || !cfg.cycle_time_s.is_finite() {
        return bad(format!("cycle_time_s must be positive, got {}", cfg.cycle_time_s));
    }

    let cycle_ms = (cfg.cycle_time_s * 1000.0).round() as i64;
    if (cycle_ms as f64 - cfg.cycle_time_s * 1000.0).abs() > 1e-6 || cycle_ms % cfg.plc_step_ms != 0 {
        return Err(SynthError::InfeasibleDwell(format!(
            "cycle of {} s is not a whole number of {} ms steps",
            cfg.cycle_time_s, cfg.plc_step_ms
        )));
    }
    let ticks = cycle_ms / cfg.plc_step_ms;
    let n = cfg.n_states as i64;
    if ticks < n {
        return Err(SynthError::InfeasibleDwell(format!(
            "{ticks} steps cannot host {n} states"
        )));
    }
    // near-equal split, remainder on the earliest states
    let dwell = (0..n)
        .map(|s| ticks / n + i64::from(s < ticks % n))
        .collect();
    Ok((cycle_ms, dwell))
}

struct Recorder {
    timestamps: Vec<i64>,
    rows: Vec<Vec<f64>>,
}

impl Recorder {
    fn emit(&mut self, t: i64, values: Vec<f64>) {
        if self.rows.last() != Some(&values) {
            self.timestamps.push(t);
            self.rows.push(values);
        }
    }
}

pub fn generate(config: &SynthConfig) -> Result<(EventSeries, GroundTruth), SynthError> {
    let (_, base_dwell) = validate(config)?;
    let layout = Layout::new(config);
    let step = config.plc_step_ms;
    let n_states = config.n_states;
    let duration_ms = (config.duration_s * 1000.0).round() as i64;
    let toggle_targets: Vec<usize> = (0..layout.roles.len())
        .filter(|&f| layout.is_boolean_signal(f))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rec = Recorder {
        timestamps: Vec::new(),
        rows: Vec::new(),
    };
    let mut boundaries = vec![0i64];
    let mut noisy_cycles = Vec::new();
    let mut t = 0i64;

    loop {
        let noisy = rng.random::<f64>() < config.noise_fraction;
        let mut dwell = base_dwell.clone();
        let mut toggle: Option<(usize, usize, i64)> = None;
        if noisy {
            for d in dwell.iter_mut() {
                let factor = 1.0 + rng.random_range(-DWELL_JITTER..=DWELL_JITTER);
                *d = ((*d as f64 * factor).round() as i64).max(1);
            }
            let hosts: Vec<usize> = (0..n_states).filter(|&s| dwell[s] >= 2).collect();
            if !hosts.is_empty() && !toggle_targets.is_empty() {
                let f = toggle_targets[rng.random_range(0..toggle_targets.len())];
                let s = hosts[rng.random_range(0..hosts.len())];
                let offset = rng.random_range(1..dwell[s]);
                toggle = Some((f, s, offset));
            }
        }
        let cycle_len: i64 = dwell.iter().sum::<i64>() * step;
        if t + cycle_len > duration_ms {
            break;
        }
        if noisy {
            noisy_cycles.push(boundaries.len() - 1);
        }
        for (s, &d) in dwell.iter().enumerate() {
            rec.emit(t, layout.values(s, None));
            if let Some((f, ts, offset)) = toggle {
                if ts == s {
                    rec.emit(t + offset * step, layout.values(s, Some(f)));
                }
            }
            t += d * step;
        }
        boundaries.push(t);
    }
    if boundaries.len() < 2 {
        return Err(SynthError::NoCompleteCycle {
            duration_s: config.duration_s,
            cycle_time_s: config.cycle_time_s,
        });
    }
    // closing row: the next cycle begins
    rec.emit(t, layout.values(0, None));

    let names: Vec<String> = (0..layout.roles.len()).map(|i| format!("signal_{i:02}")).collect();
    let columns = names
        .iter()
        .enumerate()
        .map(|(f, name)| FeatureColumn::new(name.clone(), rec.rows.iter().map(|r| r[f]).collect()))
        .collect();
    let series = EventSeries::new(format!("synth_seed{}", config.seed), rec.timestamps, columns)
        .expect("generator emits strictly increasing rows");

    let copy = layout.roles.len() - 1;
    let Role::Copy(source) = layout.roles[copy] else {
        unreachable!("layout always ends with the duplicate")
    };
    let truth = GroundTruth {
        feature_names: names,
        anchor_index: 0,
        anchor_echo_index: layout.index_of(|r| matches!(r, Role::Echo { .. })),
        level_index: layout.index_of(|r| *r == Role::Level),
        constant_indices: (0..layout.roles.len())
            .filter(|&f| matches!(layout.roles[f], Role::Constant(_)))
            .collect(),
        duplicate: DuplicatePair { source, copy },
        cycle_boundaries_ms: boundaries,
        noisy_cycles,
        dwell_ticks: base_dwell,
        config: config.clone(),
    };
    Ok((series, truth))
}
