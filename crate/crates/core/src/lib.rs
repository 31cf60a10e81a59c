//! Random numbers from random permutation sorting.
//!
//! A small disordered array is shuffled by a seeded PRNG until it is sorted.
//! Each sorting cycle yields two observables: the number of shuffles it took
//! and how long it took. Reduced modulo `2^n`, the first gives a reproducible
//! stream ([`Mode::Dqrng`]), the second a stream driven by timing jitter
//! ([`Mode::Qqrng`]). [`Mode::Hybrid`] outputs the shuffle count while feeding
//! the timing symbol back into the PRNG seed after every cycle.
//!
//! ```
//! use qpp_rng::{Generator, GeneratorConfig, Mode, MonotonicClock};
//!
//! let config = GeneratorConfig::new(4, 4, 4, Mode::Dqrng, 1)?;
//! let bytes = Generator::new(config, MonotonicClock::new()).generate_bytes(16)?;
//! assert_eq!(bytes.len(), 16);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The [`entropy`] module holds the statistics used to judge the output, and
//! [`experiments`] drives parameter sweeps and throughput runs.

pub mod clock;
pub mod entropy;
pub mod experiments;
pub mod generator;
pub mod prng;
pub mod sorting;

pub use clock::{ClockError, ClockKind, ClockSpec, MonotonicClock, ScriptedClock, TickReading, TimeSource};
pub use entropy::{AnalysisError, EntropyReport, Histogram};
pub use generator::{
    generate_symbol, theoretical_bound, ConfigError, CycleObservables, Generator, GeneratorConfig, GeneratorError, Mode,
};
pub use prng::{IndexSource, LcgParams, PrngError, PrngState};
pub use sorting::{SortError, SortingCycleResult, WorkArray};
