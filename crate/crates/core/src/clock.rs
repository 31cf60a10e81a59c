//! Monotonic tick sources.
//!
//! [`MonotonicClock`] reads the platform monotonic clock in nanoseconds.
//! [`ScriptedClock`] replays a fixed sequence of readings so that the
//! timing-dependent modes can be reproduced exactly in tests.
//!
//! Script files are plain text. The first non-comment line selects the mode:
//!
//! ```text
//! mode=absolute      # each line is a reading
//! mode=delta         # each line is the increment from the previous reading
//! mode=delta repeat  # as above, cycling through the increments forever
//! ```
//!
//! Delta scripts start at 0: the first call returns 0 and each later call adds
//! the next increment. Lines starting with `#` and blank lines are ignored.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

/// Consecutive identical real-clock readings tolerated before the clock is
/// declared stuck.
pub const MAX_IDENTICAL_READINGS: u32 = 10_000;

#[derive(Debug, Error)]
pub enum ClockError {
    #[error("clock script exhausted after {0} readings")]
    ScriptExhausted(usize),
    #[error("clock returned the same reading {0} times in a row; timer resolution is degenerate")]
    DegenerateResolution(u32),
    #[error("timer never advanced over {0} probe pairs")]
    NoPositiveDelta(usize),
    #[error("resolution probe needs at least 100 samples, got {0}")]
    TooFewSamples(usize),
    #[error("clock reading overflowed 64 bits")]
    Overflow,
    #[error("clock script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("failed to read clock script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A single reading in the source's native ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TickReading(pub u64);

impl TickReading {
    pub fn ticks(self) -> u64 {
        self.0
    }

    /// Elapsed ticks from `earlier` to `self`.
    pub fn since(self, earlier: TickReading) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockKind {
    /// Platform monotonic clock, nanoseconds.
    RealMonotonic,
    /// Scripted readings, abstract ticks.
    ScriptedMock,
}

impl fmt::Display for ClockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClockKind::RealMonotonic => "real-monotonic",
            ClockKind::ScriptedMock => "scripted-mock",
        })
    }
}

pub trait TimeSource {
    fn now(&mut self) -> Result<TickReading, ClockError>;

    fn kind(&self) -> ClockKind;
}

impl<T: TimeSource + ?Sized> TimeSource for Box<T> {
    fn now(&mut self) -> Result<TickReading, ClockError> {
        (**self).now()
    }

    fn kind(&self) -> ClockKind {
        (**self).kind()
    }
}

impl<T: TimeSource + ?Sized> TimeSource for &mut T {
    fn now(&mut self) -> Result<TickReading, ClockError> {
        (**self).now()
    }

    fn kind(&self) -> ClockKind {
        (**self).kind()
    }
}

/// Nanoseconds since the clock was created, from [`Instant`].
#[derive(Debug, Clone)]
pub struct MonotonicClock {
    origin: Instant,
    last: u64,
    repeats: u32,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
            last: 0,
            repeats: 0,
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl TimeSource for MonotonicClock {
    #[inline]
    fn now(&mut self) -> Result<TickReading, ClockError> {
        let nanos = u64::try_from(self.origin.elapsed().as_nanos()).map_err(|_| ClockError::Overflow)?;
        if nanos == self.last {
            self.repeats += 1;
            if self.repeats >= MAX_IDENTICAL_READINGS {
                return Err(ClockError::DegenerateResolution(self.repeats));
            }
        } else {
            self.last = nanos;
            self.repeats = 0;
        }
        Ok(TickReading(nanos))
    }

    fn kind(&self) -> ClockKind {
        ClockKind::RealMonotonic
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Script {
    Absolute(Vec<u64>),
    Delta { deltas: Vec<u64>, repeat: bool },
}

/// Replays scripted readings. A clone continues from the same position as the
/// original; call [`ScriptedClock::rewind`] to replay from the start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedClock {
    script: Script,
    start: u64,
    calls: usize,
    current: u64,
}

impl ScriptedClock {
    /// Plays back `readings` verbatim. Readings must be non-decreasing.
    pub fn absolute(readings: Vec<u64>) -> Result<Self, ClockError> {
        if let Some(pos) = readings.windows(2).position(|w| w[1] < w[0]) {
            return Err(ClockError::Script {
                line: pos + 2,
                message: format!("reading {} is below the previous {}", readings[pos + 1], readings[pos]),
            });
        }
        Ok(Self::with_script(Script::Absolute(readings)))
    }

    /// Starts at 0 and adds one increment per call after the first.
    pub fn deltas(deltas: Vec<u64>) -> Self {
        Self::with_script(Script::Delta { deltas, repeat: false })
    }

    /// Like [`ScriptedClock::deltas`] but cycles through the increments forever.
    pub fn repeating_deltas(deltas: Vec<u64>) -> Self {
        if deltas.is_empty() {
            return Self::deltas(deltas);
        }
        Self::with_script(Script::Delta { deltas, repeat: true })
    }

    /// Arithmetic progression `start, start + step, ...`.
    pub fn stepping(start: u64, step: u64) -> Self {
        let mut clock = Self::repeating_deltas(vec![step]);
        clock.start = start;
        clock.current = start;
        clock
    }

    fn with_script(script: Script) -> Self {
        Self {
            script,
            start: 0,
            calls: 0,
            current: 0,
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ClockError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ClockError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    /// Rewinds to the first reading.
    pub fn rewind(&mut self) {
        self.calls = 0;
        self.current = self.start;
    }
}

impl TimeSource for ScriptedClock {
    fn now(&mut self) -> Result<TickReading, ClockError> {
        let call = self.calls;
        let reading = match &self.script {
            Script::Absolute(readings) => *readings.get(call).ok_or(ClockError::ScriptExhausted(call))?,
            Script::Delta { deltas, repeat } => {
                if call > 0 {
                    let idx = call - 1;
                    let delta = if *repeat {
                        deltas[idx % deltas.len()]
                    } else {
                        *deltas.get(idx).ok_or(ClockError::ScriptExhausted(call))?
                    };
                    self.current = self.current.checked_add(delta).ok_or(ClockError::Overflow)?;
                }
                self.current
            }
        };
        self.calls += 1;
        Ok(TickReading(reading))
    }

    fn kind(&self) -> ClockKind {
        ClockKind::ScriptedMock
    }
}

impl FromStr for ScriptedClock {
    type Err = ClockError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines.next().ok_or(ClockError::Script {
            line: 1,
            message: "missing mode header".into(),
        })?;
        let mut tokens = header.split_whitespace();
        let absolute = match tokens.next() {
            Some("mode=absolute") => true,
            Some("mode=delta") => false,
            other => {
                return Err(ClockError::Script {
                    line: header_line,
                    message: format!("expected mode=absolute or mode=delta, found {:?}", other.unwrap_or("")),
                })
            }
        };
        let repeat = match tokens.next() {
            None => false,
            Some("repeat") if !absolute => true,
            Some(token) => {
                return Err(ClockError::Script {
                    line: header_line,
                    message: format!("unexpected header token {token:?}"),
                })
            }
        };

        let values = lines
            .map(|(line, l)| {
                l.parse::<u64>().map_err(|e| ClockError::Script {
                    line,
                    message: format!("{l:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        if absolute {
            Self::absolute(values)
        } else if repeat {
            if values.is_empty() {
                return Err(ClockError::Script {
                    line: header_line,
                    message: "repeating delta script has no increments".into(),
                });
            }
            Ok(Self::repeating_deltas(values))
        } else {
            Ok(Self::deltas(values))
        }
    }
}

/// Which clock to build for a run. Each [`ClockSpec::instantiate`] call
/// yields a fresh clock; scripted clocks start from their first reading.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ClockSpec {
    #[default]
    Real,
    Scripted(ScriptedClock),
}

impl ClockSpec {
    pub fn instantiate(&self) -> Box<dyn TimeSource + Send> {
        match self {
            ClockSpec::Real => Box::new(MonotonicClock::new()),
            ClockSpec::Scripted(script) => {
                let mut clock = script.clone();
                clock.rewind();
                Box::new(clock)
            }
        }
    }

    pub fn kind(&self) -> ClockKind {
        match self {
            ClockSpec::Real => ClockKind::RealMonotonic,
            ClockSpec::Scripted(_) => ClockKind::ScriptedMock,
        }
    }
}

/// Smallest positive difference over `samples` back-to-back reading pairs.
pub fn resolution_probe<T: TimeSource + ?Sized>(source: &mut T, samples: usize) -> Result<u64, ClockError> {
    if samples < 100 {
        return Err(ClockError::TooFewSamples(samples));
    }
    let mut best: Option<u64> = None;
    for _ in 0..samples {
        let first = source.now()?;
        let second = source.now()?;
        let delta = second.since(first);
        if delta > 0 {
            best = Some(best.map_or(delta, |b| b.min(delta)));
        }
    }
    best.ok_or(ClockError::NoPositiveDelta(samples))
}
