//! Shared fixtures for the criterion benches.

use qpp_rng::{GeneratorConfig, Mode};

/// `(N, m)` points measured by the throughput benches, fastest first.
pub const POINTS: [(usize, u32); 4] = [(4, 1), (4, 3), (4, 4), (5, 5)];

/// Byte-packable config for `(N, m)` with the usual symbol width for `N`.
pub fn config(array_len: usize, repetitions: u32, mode: Mode) -> GeneratorConfig {
    let bits = if array_len >= 5 { 8 } else { 4 };
    GeneratorConfig::new(array_len, repetitions, bits, mode, 1).expect("bench points are valid")
}
