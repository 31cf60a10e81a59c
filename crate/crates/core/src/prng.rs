//! 64-bit linear congruential generator that drives the permutation choices.
//!
//! The state advances as `seed <- a * seed + c (mod 2^64)`. Indices are taken
//! from the high 32 bits of the new state, because the low bits of a
//! power-of-two-modulus LCG have short periods (bit `k` repeats every `2^(k+1)`
//! steps) and would make small-bound draws cycle.

use thiserror::Error;

/// Errors raised by the PRNG when called outside its contract.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrngError {
    #[error("bound {0} is out of range: bound + 1 must not exceed 2^32")]
    BoundTooLarge(u64),
    #[error("reseed bit width {0} is out of range 1..=32")]
    InvalidWidth(u32),
    #[error("jitter value {jitter} does not fit in {bits} bits")]
    JitterOutOfRange { jitter: u64, bits: u32 },
}

/// Multiplier and increment of the recurrence. The modulus is fixed at 2^64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LcgParams {
    pub multiplier: u64,
    pub increment: u64,
}

impl LcgParams {
    /// Knuth's MMIX constants.
    pub const MMIX: LcgParams = LcgParams {
        multiplier: 6_364_136_223_846_793_005,
        increment: 1_442_695_040_888_963_407,
    };

    /// Both constants must be odd for the recurrence to reach every 64-bit
    /// state (Hull-Dobell with modulus 2^64 additionally needs `a = 1 mod 4`).
    pub fn has_full_period(&self) -> bool {
        self.increment & 1 == 1 && self.multiplier & 3 == 1
    }
}

impl Default for LcgParams {
    fn default() -> Self {
        Self::MMIX
    }
}

/// The generator's full state: one 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PrngState {
    seed: u64,
}

impl PrngState {
    pub const fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub const fn seed(&self) -> u64 {
        self.seed
    }

    /// Advances the state once and returns the new seed.
    #[inline]
    pub fn step(&mut self) -> u64 {
        self.seed = lcg_step(self.seed, LcgParams::MMIX);
        self.seed
    }

    /// Draws an index in `[0, bound]`.
    pub fn next_int(&mut self, bound: u64) -> Result<u32, PrngError> {
        if bound > u64::from(u32::MAX) {
            return Err(PrngError::BoundTooLarge(bound));
        }
        Ok(self.draw(bound as u32))
    }

    #[inline]
    fn draw(&mut self, bound: u32) -> u32 {
        let high = (self.step() >> 32) as u32;
        (u64::from(high) % (u64::from(bound) + 1)) as u32
    }

    /// Folds `jitter` into the state: `seed <- (seed << bits) ^ jitter`.
    pub fn reseed(&mut self, jitter: u64, bits: u32) -> Result<(), PrngError> {
        self.seed = reseed(self.seed, jitter, bits)?;
        Ok(())
    }
}

/// One step of the recurrence, modulo 2^64.
#[inline]
pub const fn lcg_step(seed: u64, params: LcgParams) -> u64 {
    params.multiplier.wrapping_mul(seed).wrapping_add(params.increment)
}

/// Pure form of [`PrngState::reseed`].
pub fn reseed(seed: u64, jitter: u64, bits: u32) -> Result<u64, PrngError> {
    if !(1..=32).contains(&bits) {
        return Err(PrngError::InvalidWidth(bits));
    }
    if jitter >> bits != 0 {
        return Err(PrngError::JitterOutOfRange { jitter, bits });
    }
    Ok((seed << bits) ^ jitter)
}

/// Anything that can hand out Fisher-Yates swap indices.
///
/// The shuffle only ever asks for `bound <= 7`, so implementations are
/// infallible.
pub trait IndexSource {
    /// Returns an index in `[0, bound]`.
    fn next_index(&mut self, bound: u32) -> u32;
}

impl IndexSource for PrngState {
    #[inline]
    fn next_index(&mut self, bound: u32) -> u32 {
        self.draw(bound)
    }
}

impl<T: IndexSource + ?Sized> IndexSource for &mut T {
    fn next_index(&mut self, bound: u32) -> u32 {
        (**self).next_index(bound)
    }
}
