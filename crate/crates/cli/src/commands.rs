use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use qpp_rng::experiments::{self, BenchBudget, BenchSpec, ExperimentError, SweepSpec, Table1Spec};
use qpp_rng::{
    AnalysisError, ClockSpec, ConfigError, CycleObservables, EntropyReport, Generator, GeneratorConfig, GeneratorError,
    Histogram,
};

use crate::args::{AnalyzeArgs, BenchArgs, ClockArgs, Format, GenerateArgs, SweepArgs, Table1Args};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Version of every JSON document this tool writes.
pub const SCHEMA_VERSION: u32 = 1;

const CHUNK: usize = 1 << 16;

/// A bad flag or input that no retry would fix.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        let validation = cause.is::<Invalid>()
            || cause.is::<ConfigError>()
            || cause.is::<AnalysisError>()
            || cause
                .downcast_ref::<GeneratorError>()
                .is_some_and(GeneratorError::is_validation)
            || cause
                .downcast_ref::<ExperimentError>()
                .is_some_and(ExperimentError::is_validation);
        if validation {
            return EXIT_VALIDATION;
        }
    }
    EXIT_RUNTIME
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(path) => {
            let mut out = create(path)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        None => emit(&text)?,
    }
    Ok(())
}

fn resolve_clock(args: &ClockArgs) -> Result<ClockSpec> {
    args.resolve().map_err(|e| invalid(format!("clock: {e}")))
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    mode: &'a str,
    n_array: usize,
    m: u32,
    bits: u32,
    seed: u64,
    initial_array: &'a [u8],
    count: usize,
    format: &'a str,
    packing: &'a str,
    clock: String,
    clock_script: Option<&'a Path>,
    cycle_entropy_bound_bits: f64,
    entropy_budget_satisfied: bool,
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let config = GeneratorConfig::new(args.n_array, args.m, args.bits, args.mode, args.seed)?;
    if args.format == Format::Bytes {
        config.symbols_per_byte()?;
    }
    let clock = resolve_clock(&args.clock)?;
    let mut gen = Generator::new(config, clock.instantiate());

    let mut diagnostics = match &args.diagnostics {
        Some(path) => Some(csv::Writer::from_writer(create(path)?)),
        None => None,
    };
    let mut record = |obs: &CycleObservables| -> Result<()> {
        if let Some(w) = diagnostics.as_mut() {
            w.serialize(obs)?;
        }
        Ok(())
    };

    let mut out = create(&args.out)?;
    match args.format {
        Format::Bytes => {
            let mut buf = vec![0u8; CHUNK];
            let mut remaining = args.count;
            while remaining > 0 {
                let chunk = &mut buf[..remaining.min(CHUNK)];
                let mut failed = None;
                gen.fill_bytes_with(chunk, |obs| {
                    if failed.is_none() {
                        failed = record(obs).err();
                    }
                })?;
                if let Some(e) = failed {
                    return Err(e);
                }
                out.write_all(chunk)?;
                remaining -= chunk.len();
            }
        }
        Format::Symbols => {
            for _ in 0..args.count {
                let (symbol, obs) = gen.next_symbol()?;
                record(&obs)?;
                out.write_all(&symbol.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    if let Some(mut w) = diagnostics {
        w.flush()?;
    }

    if !args.no_metadata {
        let sidecar = Sidecar {
            schema_version: SCHEMA_VERSION,
            mode: config.mode().as_str(),
            n_array: config.array_len(),
            m: config.repetitions(),
            bits: config.bits(),
            seed: config.seed(),
            initial_array: config.initial_array().as_slice(),
            count: args.count,
            format: args.format.as_str(),
            packing: match args.format {
                Format::Bytes if config.bits() == 4 => "high-nibble-first",
                Format::Bytes => "one-symbol-per-byte",
                Format::Symbols => "u16-little-endian",
            },
            clock: clock.kind().to_string(),
            clock_script: args.clock.script_path().map(PathBuf::as_path),
            cycle_entropy_bound_bits: config.cycle_entropy_bound(),
            entropy_budget_satisfied: config.entropy_budget_satisfied(),
        };
        let value = serde_json::to_value(&sidecar)?;
        write_json(Some(&sidecar_path(&args.out)), &value)?;
    }
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let data = std::fs::read(&args.input).map_err(|e| invalid(format!("cannot read {}: {e}", args.input.display())))?;
    let hist = match (args.format, args.bits) {
        (Format::Bytes, 8) => Histogram::from_bytes(&data),
        (Format::Bytes, 4) => Histogram::from_nibbles(&data),
        (Format::Bytes, bits) => {
            return Err(invalid(format!("byte files hold 4- or 8-bit symbols, not {bits}-bit")));
        }
        (Format::Symbols, bits) => {
            if data.len() % 2 != 0 {
                return Err(invalid("symbol files hold whole u16 values; length is odd"));
            }
            let symbols = data.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]]));
            Histogram::from_symbols(symbols, bits)?
        }
    };
    let report = EntropyReport::from_histogram(&hist)?;

    let metadata = std::fs::read_to_string(sidecar_path(&args.input))
        .ok()
        .and_then(|text| serde_json::from_str::<Value>(&text).ok());
    let mut value = json!({
        "schema_version": SCHEMA_VERSION,
        "input": {
            "file": args.input,
            "bytes": data.len(),
            "format": args.format.as_str(),
            "bits": args.bits,
            "metadata": metadata,
        },
    });
    if let (Value::Object(doc), Value::Object(fields)) = (&mut value, serde_json::to_value(&report)?) {
        doc.extend(fields);
    }
    write_json(args.out.as_deref(), &value)?;

    if let Some(path) = &args.histogram {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["symbol", "count"])?;
        for (symbol, count) in hist.bins().iter().enumerate() {
            w.write_record([symbol.to_string(), count.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        array_lens: args.n_array.0.clone(),
        repetitions: args.m.0.clone(),
        modes: args.mode.0.clone(),
        bytes_per_point: args.bytes,
        seed: args.seed,
        bits: args.bits,
        clock: resolve_clock(&args.clock)?,
    };
    let mut rows = experiments::run_sweep(&spec)?;
    if args.no_speed {
        rows = rows.into_iter().map(|r| r.without_speed()).collect();
    }

    match &args.csv {
        Some(path) => write_csv(csv::Writer::from_writer(create(path)?), &rows)?,
        None => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row)?;
            }
            emit(&String::from_utf8(w.into_inner()?)?)?;
        }
    }
    if let Some(path) = &args.json {
        write_json(Some(path), &json!({ "schema_version": SCHEMA_VERSION, "rows": rows }))?;
    }

    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            let e = r.error.as_ref()?;
            Some(format!("N={} m={} {}: {e}", r.array_len, r.m, r.mode))
        })
        .collect();
    if !failed.is_empty() {
        anyhow::bail!("{} sweep point(s) failed: {}", failed.len(), failed.join("; "));
    }
    Ok(())
}

fn write_csv<W: Write, T: Serialize>(mut w: csv::Writer<W>, rows: &[T]) -> Result<()> {
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn table1(args: &Table1Args) -> Result<()> {
    let spec = Table1Spec {
        pads: args.pads,
        runs: args.runs,
        array_len: args.n_array,
        repetitions: args.m,
        bits: args.bits,
        first_seed: args.seed,
        clock: resolve_clock(&args.clock)?,
    };
    let rows = experiments::table1(&spec)?;
    emit(&experiments::render_table1(&rows))?;
    if let Some(path) = &args.json {
        write_json(Some(path), &json!({ "schema_version": SCHEMA_VERSION, "rows": rows }))?;
    }
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let budget = match (args.bytes, args.seconds) {
        (Some(bytes), _) => BenchBudget::Bytes(bytes),
        (None, Some(secs)) => BenchBudget::Time(
            Duration::try_from_secs_f64(secs).map_err(|_| invalid(format!("invalid time budget {secs}")))?,
        ),
        (None, None) => return Err(invalid("bench needs --bytes or --seconds")),
    };
    let spec = BenchSpec {
        points: args.points.0.clone(),
        modes: args.mode.0.clone(),
        budget,
        seed: args.seed,
        bits: args.bits,
    };
    let report = experiments::run_bench(&spec)?;

    let p = &report.platform;
    let resolution = p
        .timer_resolution_ns
        .map_or_else(|| "unknown".to_string(), |ns| format!("{ns} ns"));
    let mut text = format!(
        "platform: {} {} ({} cpus), timer resolution {resolution}\n",
        p.os, p.arch, p.cpus
    );
    text += &format!(
        "{:<6}{:>4}{:>4}{:>6}{:>12}{:>10}{:>12}\n",
        "mode", "N", "m", "bits", "bytes", "seconds", "KB/s"
    );
    for r in &report.rows {
        text += &format!(
            "{:<6}{:>4}{:>4}{:>6}{:>12}{:>10.3}{:>12.1}\n",
            r.mode.as_str(),
            r.array_len,
            r.m,
            r.bits,
            r.bytes,
            r.seconds,
            r.kb_per_s
        );
    }
    emit(&text)?;
    if let Some(path) = &args.json {
        let mut value = serde_json::to_value(&report)?;
        if let Value::Object(doc) = &mut value {
            doc.insert("schema_version".into(), SCHEMA_VERSION.into());
        }
        write_json(Some(path), &value)?;
    }
    Ok(())
}
