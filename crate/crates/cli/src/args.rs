use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpp_rng::{ClockSpec, Mode, ScriptedClock};

#[derive(Debug, Parser)]
#[command(
    name = "qpp-rng",
    version,
    about = "Random numbers from the timing of random permutation sorting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a headless binary stream plus a JSON sidecar.
    Generate(GenerateArgs),
    /// Compute entropy statistics for a file.
    Analyze(AnalyzeArgs),
    /// Generate and analyze every (N, m, mode) point.
    Sweep(SweepArgs),
    /// Rerun cycles per pad to show fixed permutation symbols and varying timing symbols.
    Table1(Table1Args),
    /// Measure generation throughput on the real clock.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// One byte per 8-bit symbol, or two 4-bit symbols per byte (high nibble first).
    Bytes,
    /// Every symbol as a little-endian u16.
    Symbols,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Bytes => "bytes",
            Format::Symbols => "symbols",
        }
    }
}

/// `real` or `script:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClockArg {
    Real,
    Script(PathBuf),
}

impl FromStr for ClockArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(ClockArg::Real),
            _ => match s.strip_prefix("script:") {
                Some(path) if !path.is_empty() => Ok(ClockArg::Script(PathBuf::from(path))),
                _ => Err(format!("expected `real` or `script:PATH`, got {s:?}")),
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct ClockArgs {
    /// Clock kind: `real` or `script:PATH`.
    #[arg(long, env = "QPP_RNG_CLOCK", default_value = "real")]
    pub clock: ClockArg,

    /// Replay a clock script instead of the real clock; overrides --clock.
    #[arg(long, value_name = "PATH")]
    pub clock_script: Option<PathBuf>,
}

impl ClockArgs {
    pub fn script_path(&self) -> Option<&PathBuf> {
        match (&self.clock_script, &self.clock) {
            (Some(path), _) | (None, ClockArg::Script(path)) => Some(path),
            (None, ClockArg::Real) => None,
        }
    }

    pub fn resolve(&self) -> Result<ClockSpec, qpp_rng::ClockError> {
        match self.script_path() {
            Some(path) => Ok(ClockSpec::Scripted(ScriptedClock::from_path(path)?)),
            None => Ok(ClockSpec::Real),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "qpp", value_parser = parse_mode)]
    pub mode: Mode,
    /// Array length N.
    #[arg(long = "n-array", default_value_t = 4)]
    pub n_array: usize,
    /// Repetitions per cycle.
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    /// Bits per symbol.
    #[arg(long, default_value_t = 4)]
    pub bits: u32,
    /// Bytes to write (symbols with --format symbols).
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Bytes)]
    pub format: Format,
    /// Write per-cycle observables (n_p, t_raw, n_mod, t_mod) as CSV.
    #[arg(long, value_name = "PATH")]
    pub diagnostics: Option<PathBuf>,
    /// Skip the `<out>.json` sidecar.
    #[arg(long)]
    pub no_metadata: bool,
    #[command(flatten)]
    pub clock: ClockArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    /// Symbol width the file was produced with.
    #[arg(long, default_value_t = 8)]
    pub bits: u32,
    #[arg(long, value_enum, default_value_t = Format::Bytes)]
    pub format: Format,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write `symbol,count` rows here.
    #[arg(long, value_name = "PATH")]
    pub histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Array lengths, e.g. `4` or `4,5`.
    #[arg(long = "n-array", default_value = "4", value_parser = parse_list::<usize>)]
    pub n_array: List<usize>,
    /// Repetitions, e.g. `1..6` or `3,4`.
    #[arg(long, default_value = "1..6", value_parser = parse_list::<u32>)]
    pub m: List<u32>,
    /// Modes, e.g. `dqrng,qqrng`.
    #[arg(long, default_value = "dqrng", value_parser = parse_modes)]
    pub mode: List<Mode>,
    #[arg(long, default_value_t = 1 << 20)]
    pub bytes: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Symbol width (default: 4 for N <= 4, 8 above).
    #[arg(long)]
    pub bits: Option<u32>,
    /// CSV destination (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Leave the speed column empty, for reproducible output.
    #[arg(long)]
    pub no_speed: bool,
    #[command(flatten)]
    pub clock: ClockArgs,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long, default_value_t = 10)]
    pub pads: usize,
    /// Runs per pad.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long = "n-array", default_value_t = 4)]
    pub n_array: usize,
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    #[arg(long, default_value_t = 4)]
    pub bits: u32,
    /// Seed of the first pad; pad i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub clock: ClockArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `N:m` pairs, e.g. `4:3,5:5`.
    #[arg(long, default_value = "4:3,4:4,4:5,5:3,5:4,5:5", value_parser = parse_points)]
    pub points: List<(usize, u32)>,
    #[arg(long, default_value = "qpp", value_parser = parse_modes)]
    pub mode: List<Mode>,
    /// Byte budget per point.
    #[arg(long, conflicts_with = "seconds")]
    pub bytes: Option<u64>,
    /// Time budget per point.
    #[arg(long)]
    pub seconds: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: qpp_rng::ConfigError| e.to_string())
}

fn parse_modes(s: &str) -> Result<List<Mode>, String> {
    s.split(',')
        .map(|m| parse_mode(m.trim()))
        .collect::<Result<_, _>>()
        .map(List)
}

/// A comma-separated flag value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

/// `a,b,c`, `a..b` or `a-b` (inclusive).
pub fn parse_list<T>(s: &str) -> Result<List<T>, String>
where
    T: FromStr + Copy + PartialOrd + TryInto<u64> + TryFrom<u64>,
    T::Err: std::fmt::Display,
{
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((lo, hi)) => {
                let lo: T = lo.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
                let hi: T = hi.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
                if lo > hi {
                    return Err(format!("empty range {part:?}"));
                }
                let widen = |v: T| v.try_into().map_err(|_| format!("{part:?} out of range"));
                for v in widen(lo)?..=widen(hi)? {
                    out.push(T::try_from(v).map_err(|_| format!("{part:?} out of range"))?);
                }
            }
            None => out.push(part.parse().map_err(|e| format!("{part:?}: {e}"))?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(List(out))
}

fn parse_points(s: &str) -> Result<List<(usize, u32)>, String> {
    s.split(',')
        .map(|p| {
            let (n, m) = p
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("expected N:m, got {p:?}"))?;
            let n = n.parse().map_err(|e| format!("{p:?}: {e}"))?;
            let m = m.parse().map_err(|e| format!("{p:?}: {e}"))?;
            Ok((n, m))
        })
        .collect::<Result<_, _>>()
        .map(List)
}
