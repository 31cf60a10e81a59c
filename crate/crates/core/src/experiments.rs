//! Experiment drivers behind the command-line tool: `(N, m)` sweeps, the
//! pad-by-pad determinism table, and throughput measurement.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clock::{ClockSpec, MonotonicClock};
use crate::entropy::{AnalysisError, EntropyReport};
use crate::generator::{ConfigError, Generator, GeneratorConfig, GeneratorError, Mode};

/// Smallest byte sample a sweep point may use: five expected counts per bin.
pub const MIN_SWEEP_BYTES: usize = 5 * 256;

/// One mebibyte, the default sample per experimental point.
pub const DEFAULT_SAMPLE_BYTES: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("pad {pad} (seed {seed}) produced different permutation symbols across runs: {symbols:?}")]
    DeterminismViolated { pad: usize, seed: u64, symbols: Vec<u16> },
}

impl ExperimentError {
    pub fn is_validation(&self) -> bool {
        match self {
            ExperimentError::Validation(_) | ExperimentError::Config(_) => true,
            ExperimentError::Generator(e) => e.is_validation(),
            _ => false,
        }
    }
}

/// Symbol width used when none is given: 8 bits once `N! >= 120`, else 4.
pub fn default_bits(array_len: usize) -> u32 {
    if array_len >= 5 {
        8
    } else {
        4
    }
}

/// Per-byte entropy bound: cycles per byte times `log2(m * N!)`.
pub fn byte_entropy_bound(config: &GeneratorConfig) -> f64 {
    8.0 / f64::from(config.bits()) * config.cycle_entropy_bound()
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub array_lens: Vec<usize>,
    pub repetitions: Vec<u32>,
    pub modes: Vec<Mode>,
    pub bytes_per_point: usize,
    pub seed: u64,
    /// Symbol width; `None` picks [`default_bits`] per array length.
    pub bits: Option<u32>,
    pub clock: ClockSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            array_lens: vec![4],
            repetitions: (1..=6).collect(),
            modes: vec![Mode::Dqrng],
            bytes_per_point: DEFAULT_SAMPLE_BYTES,
            seed: GeneratorConfig::DEFAULT_SEED,
            bits: None,
            clock: ClockSpec::Real,
        }
    }
}

impl SweepSpec {
    /// Checks every point, returning configs ordered by `(mode, N, m)`.
    pub fn points(&self) -> Result<Vec<GeneratorConfig>, ExperimentError> {
        if self.array_lens.is_empty() || self.repetitions.is_empty() || self.modes.is_empty() {
            return Err(ExperimentError::Validation(
                "sweep needs at least one N, m and mode".into(),
            ));
        }
        if self.bytes_per_point < MIN_SWEEP_BYTES {
            return Err(ExperimentError::Validation(format!(
                "bytes per point {} is below the chi-squared minimum {MIN_SWEEP_BYTES}",
                self.bytes_per_point
            )));
        }
        let mut modes = self.modes.clone();
        modes.sort();
        modes.dedup();
        let mut lens = self.array_lens.clone();
        lens.sort_unstable();
        lens.dedup();
        let mut reps = self.repetitions.clone();
        reps.sort_unstable();
        reps.dedup();

        let mut points = Vec::new();
        for &mode in &modes {
            for &len in &lens {
                for &m in &reps {
                    let bits = self.bits.unwrap_or_else(|| default_bits(len));
                    let config = GeneratorConfig::new(len, m, bits, mode, self.seed)?;
                    config.symbols_per_byte()?;
                    points.push(config);
                }
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub array_len: usize,
    pub m: u32,
    pub mode: Mode,
    pub bits: u32,
    pub shannon_bits: Option<f64>,
    pub mcv_min_entropy_bits: Option<f64>,
    pub chi_squared: Option<f64>,
    pub sigma: Option<f64>,
    pub theoretical_bound_bits: f64,
    pub speed_kb_per_s: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn new(config: &GeneratorConfig) -> Self {
        Self {
            array_len: config.array_len(),
            m: config.repetitions(),
            mode: config.mode(),
            bits: config.bits(),
            shannon_bits: None,
            mcv_min_entropy_bits: None,
            chi_squared: None,
            sigma: None,
            theoretical_bound_bits: byte_entropy_bound(config),
            speed_kb_per_s: None,
            error: None,
        }
    }

    /// The row with its hardware-dependent speed column cleared.
    pub fn without_speed(mut self) -> Self {
        self.speed_kb_per_s = None;
        self
    }
}

/// Runs one sweep point; failures are recorded in the row.
pub fn run_point(config: &GeneratorConfig, bytes: usize, clock: &ClockSpec) -> SweepRow {
    let mut row = SweepRow::new(config);
    let started = Instant::now();
    let generated = Generator::new(*config, clock.instantiate()).generate_bytes(bytes);
    let elapsed = started.elapsed();
    match generated
        .map_err(ExperimentError::from)
        .and_then(|data| EntropyReport::from_bytes(&data).map_err(ExperimentError::from))
    {
        Ok(report) => {
            row.shannon_bits = Some(report.shannon_bits);
            row.mcv_min_entropy_bits = Some(report.mcv_min_entropy_bits);
            row.chi_squared = Some(report.chi_squared);
            row.sigma = Some(report.sigma);
            row.speed_kb_per_s = Some(kb_per_s(bytes as u64, elapsed));
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every point of `spec`. Deterministic points run in parallel;
/// clock-driven points run one after another.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    let points = spec.points()?;
    let (deterministic, timed): (Vec<_>, Vec<_>) = points.iter().partition(|c| c.mode() == Mode::Dqrng);

    let mut rows: Vec<SweepRow> = deterministic
        .par_iter()
        .map(|config| run_point(config, spec.bytes_per_point, &spec.clock))
        .collect();
    rows.extend(
        timed
            .iter()
            .map(|config| run_point(config, spec.bytes_per_point, &spec.clock)),
    );
    rows.sort_by_key(|r| (r.mode, r.array_len, r.m));
    Ok(rows)
}

fn kb_per_s(bytes: u64, elapsed: Duration) -> f64 {
    bytes as f64 / 1024.0 / elapsed.as_secs_f64().max(1e-9)
}

#[derive(Debug, Clone)]
pub struct Table1Spec {
    pub pads: usize,
    pub runs: usize,
    pub array_len: usize,
    pub repetitions: u32,
    pub bits: u32,
    /// Pad `i` (0-based) uses seed `first_seed + i`.
    pub first_seed: u64,
    pub clock: ClockSpec,
}

impl Default for Table1Spec {
    fn default() -> Self {
        Self {
            pads: 10,
            runs: 10,
            array_len: 4,
            repetitions: 4,
            bits: 4,
            first_seed: 1,
            clock: ClockSpec::Real,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table1Row {
    pub pad: usize,
    pub seed: u64,
    /// Permutation-count symbol, identical for every run of the pad.
    pub n_symbol: u16,
    /// Timing symbol of each run.
    pub t_symbols: Vec<u16>,
}

/// For each pad, reruns one cycle `runs` times from the pad's seed and
/// records both symbols. Fails if a pad's permutation symbol ever changes.
pub fn table1(spec: &Table1Spec) -> Result<Vec<Table1Row>, ExperimentError> {
    if spec.pads == 0 || spec.runs == 0 {
        return Err(ExperimentError::Validation("pads and runs must be positive".into()));
    }
    let base = GeneratorConfig::new(
        spec.array_len,
        spec.repetitions,
        spec.bits,
        Mode::Dqrng,
        spec.first_seed,
    )?;
    let mut clock = spec.clock.instantiate();
    let mut rows = Vec::with_capacity(spec.pads);
    for pad in 0..spec.pads {
        let seed = spec.first_seed.wrapping_add(pad as u64);
        let config = base.with_seed(seed);
        let mut n_symbols = Vec::with_capacity(spec.runs);
        let mut t_symbols = Vec::with_capacity(spec.runs);
        for _ in 0..spec.runs {
            let (_, obs) = Generator::new(config, &mut clock).next_symbol()?;
            n_symbols.push(obs.n_mod);
            t_symbols.push(obs.t_mod);
        }
        if n_symbols.windows(2).any(|w| w[0] != w[1]) {
            return Err(ExperimentError::DeterminismViolated {
                pad: pad + 1,
                seed,
                symbols: n_symbols,
            });
        }
        rows.push(Table1Row {
            pad: pad + 1,
            seed,
            n_symbol: n_symbols[0],
            t_symbols,
        });
    }
    Ok(rows)
}

/// Plain-text rendering of [`table1`] output.
pub fn render_table1(rows: &[Table1Row]) -> String {
    let runs = rows.first().map_or(0, |r| r.t_symbols.len());
    let mut out = String::new();
    let _ = write!(out, "{:<8}{:>6}", "pad", "N_p");
    for i in 1..=runs {
        let _ = write!(out, "{:>5}", format!("T{i}"));
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:<8}{:>6}", format!("QPP_{}", row.pad), row.n_symbol);
        for t in &row.t_symbols {
            let _ = write!(out, "{t:>5}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchBudget {
    Bytes(u64),
    Time(Duration),
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub points: Vec<(usize, u32)>,
    pub modes: Vec<Mode>,
    pub budget: BenchBudget,
    pub seed: u64,
    pub bits: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Platform {
    pub os: &'static str,
    pub arch: &'static str,
    pub cpus: usize,
    pub timer_resolution_ns: Option<u64>,
}

impl Platform {
    pub fn detect() -> Self {
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            timer_resolution_ns: crate::clock::resolution_probe(&mut MonotonicClock::new(), 10_000).ok(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    #[serde(rename = "N")]
    pub array_len: usize,
    pub m: u32,
    pub mode: Mode,
    pub bits: u32,
    pub bytes: u64,
    pub seconds: f64,
    pub kb_per_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub platform: Platform,
    pub rows: Vec<BenchRow>,
}

/// Measures generation speed on the real clock. Speeds are machine-specific
/// and are reported, never checked.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport, ExperimentError> {
    match spec.budget {
        BenchBudget::Bytes(0) => return Err(ExperimentError::Validation("byte budget must be positive".into())),
        BenchBudget::Time(d) if d.is_zero() => {
            return Err(ExperimentError::Validation("time budget must be positive".into()))
        }
        _ => {}
    }
    if spec.points.is_empty() || spec.modes.is_empty() {
        return Err(ExperimentError::Validation(
            "bench needs at least one point and mode".into(),
        ));
    }
    let mut configs = Vec::new();
    for &mode in &spec.modes {
        for &(len, m) in &spec.points {
            let bits = spec.bits.unwrap_or_else(|| default_bits(len));
            let config = GeneratorConfig::new(len, m, bits, mode, spec.seed)?;
            config.symbols_per_byte()?;
            configs.push(config);
        }
    }

    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let mut gen = Generator::new(config, MonotonicClock::new());
        let mut chunk = [0u8; 1024];
        let started = Instant::now();
        let mut produced = 0u64;
        loop {
            let want = match spec.budget {
                BenchBudget::Bytes(total) => (total - produced).min(chunk.len() as u64),
                BenchBudget::Time(limit) if started.elapsed() < limit => chunk.len() as u64,
                BenchBudget::Time(_) => 0,
            };
            if want == 0 {
                break;
            }
            gen.fill_bytes(&mut chunk[..want as usize])?;
            produced += want;
        }
        let elapsed = started.elapsed();
        rows.push(BenchRow {
            array_len: config.array_len(),
            m: config.repetitions(),
            mode: config.mode(),
            bits: config.bits(),
            bytes: produced,
            seconds: elapsed.as_secs_f64(),
            kb_per_s: kb_per_s(produced, elapsed),
        });
    }
    Ok(BenchReport {
        platform: Platform::detect(),
        rows,
    })
}
