//! Random permutation sorting.
//!
//! A small disordered array is shuffled with Fisher-Yates until it happens to
//! come out sorted. One *cycle* repeats that `m` times from a fresh copy of the
//! starting array and reports the total number of shuffles together with the
//! elapsed time of the whole cycle.

use std::fmt;

use thiserror::Error;

use crate::clock::{ClockError, TimeSource};
use crate::prng::IndexSource;

pub const MIN_LEN: usize = 2;
pub const MAX_LEN: usize = 8;

/// Shuffles allowed per repetition before the index source is presumed stuck.
pub const SHUFFLE_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SortError {
    #[error("array length {0} is outside {MIN_LEN}..={MAX_LEN}")]
    InvalidLength(usize),
    #[error("array {0:?} is not a permutation of 0..{len}", len = .0.len())]
    NotAPermutation(Vec<u8>),
    #[error("starting array {0:?} is already sorted")]
    AlreadySorted(Vec<u8>),
    #[error("repetition count must be at least 1")]
    ZeroRepetitions,
    #[error("array still unsorted after {0} shuffles; index source appears to cycle")]
    ShuffleCapExceeded(u64),
    #[error(transparent)]
    Clock(#[from] ClockError),
}

/// A permutation of `0..N` with `2 <= N <= 8`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct WorkArray {
    elems: [u8; MAX_LEN],
    len: u8,
}

impl WorkArray {
    pub fn new(elems: &[u8]) -> Result<Self, SortError> {
        if !(MIN_LEN..=MAX_LEN).contains(&elems.len()) {
            return Err(SortError::InvalidLength(elems.len()));
        }
        let mut seen = 0u16;
        for &e in elems {
            if usize::from(e) >= elems.len() || seen & (1 << e) != 0 {
                return Err(SortError::NotAPermutation(elems.to_vec()));
            }
            seen |= 1 << e;
        }
        let mut buf = [0u8; MAX_LEN];
        buf[..elems.len()].copy_from_slice(elems);
        Ok(Self {
            elems: buf,
            len: elems.len() as u8,
        })
    }

    /// The conventional starting array for `len`: the largest value first,
    /// then `0..len-1` in order. `{3,0,1,2}` for four elements.
    pub fn rotated(len: usize) -> Result<Self, SortError> {
        if !(MIN_LEN..=MAX_LEN).contains(&len) {
            return Err(SortError::InvalidLength(len));
        }
        let elems: Vec<u8> = std::iter::once(len as u8 - 1).chain(0..len as u8 - 1).collect();
        Self::new(&elems)
    }

    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.elems[..usize::from(self.len)]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.elems[..usize::from(self.len)]
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        usize::from(self.len)
    }

    #[inline]
    pub fn is_sorted(&self) -> bool {
        is_sorted(self.as_slice())
    }

    pub fn shuffle<S: IndexSource + ?Sized>(&mut self, source: &mut S) {
        permut_array(self.as_mut_slice(), source);
    }
}

impl fmt::Debug for WorkArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// True when the elements are strictly ascending.
#[inline]
pub fn is_sorted(elems: &[u8]) -> bool {
    elems.windows(2).all(|w| w[0] < w[1])
}

/// Fisher-Yates: for `j` from `len-1` down to 1, swap `j` with a draw from `[0, j]`.
#[inline]
pub fn permut_array<S: IndexSource + ?Sized>(elems: &mut [u8], source: &mut S) {
    for j in (1..elems.len()).rev() {
        let r = source.next_index(j as u32) as usize;
        elems.swap(j, r);
    }
}

/// Outcome of one sorting cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortingCycleResult {
    /// Shuffles summed over all repetitions.
    pub permutation_count: u64,
    /// Clock ticks between the readings taken before and after the cycle.
    pub elapsed_ticks: u64,
}

/// Shuffles a fresh copy of `initial` until sorted; returns the shuffle count.
#[inline]
pub fn sort_once<S: IndexSource + ?Sized>(initial: &WorkArray, source: &mut S) -> Result<u64, SortError> {
    let mut array = *initial;
    let mut shuffles = 0u64;
    while !array.is_sorted() {
        if shuffles == SHUFFLE_CAP {
            return Err(SortError::ShuffleCapExceeded(shuffles));
        }
        array.shuffle(source);
        shuffles += 1;
    }
    Ok(shuffles)
}

/// Runs `repetitions` sorts of `initial`, bracketed by two clock readings.
pub fn run_sorting_cycle<S, C>(
    initial: &WorkArray,
    repetitions: u32,
    source: &mut S,
    clock: &mut C,
) -> Result<SortingCycleResult, SortError>
where
    S: IndexSource + ?Sized,
    C: TimeSource + ?Sized,
{
    if repetitions == 0 {
        return Err(SortError::ZeroRepetitions);
    }
    if initial.is_sorted() {
        return Err(SortError::AlreadySorted(initial.as_slice().to_vec()));
    }
    let start = clock.now()?;
    let mut permutation_count = 0u64;
    for _ in 0..repetitions {
        permutation_count += sort_once(initial, source)?;
    }
    let end = clock.now()?;
    Ok(SortingCycleResult {
        permutation_count,
        elapsed_ticks: end.since(start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ScriptedClock;
    use crate::prng::PrngState;
    use proptest::prelude::*;

    /// Plays back fixed indices, cycling.
    struct Scripted {
        indices: Vec<u32>,
        pos: usize,
    }

    impl Scripted {
        fn new(indices: &[u32]) -> Self {
            Self {
                indices: indices.to_vec(),
                pos: 0,
            }
        }
    }

    impl IndexSource for Scripted {
        fn next_index(&mut self, bound: u32) -> u32 {
            let r = self.indices[self.pos % self.indices.len()];
            self.pos += 1;
            assert!(r <= bound);
            r
        }
    }

    fn hand_trace(mut elems: Vec<u8>, draws: &[usize]) -> Vec<u8> {
        let n = elems.len();
        for (step, &r) in draws.iter().enumerate() {
            let j = n - 1 - step;
            elems.swap(j, r);
        }
        elems
    }

    #[test]
    fn sortedness() {
        assert!(is_sorted(&[0, 1, 2, 3]));
        assert!(!is_sorted(&[3, 0, 1, 2]));
        assert!(is_sorted(&[0]));
        assert!(is_sorted(&[]));
    }

    #[test]
    fn work_array_validation() {
        assert!(WorkArray::new(&[0]).is_err());
        assert!(WorkArray::new(&[0, 1, 1]).is_err());
        assert!(WorkArray::new(&[0, 1, 3]).is_err());
        assert!(WorkArray::new(&[0; 9]).is_err());
        assert_eq!(WorkArray::rotated(4).unwrap().as_slice(), &[3, 0, 1, 2]);
        assert_eq!(WorkArray::rotated(5).unwrap().as_slice(), &[4, 0, 1, 2, 3]);
    }

    #[test]
    fn single_element_draws_nothing() {
        let mut prng = PrngState::new(42);
        let mut elems = [0u8];
        permut_array(&mut elems, &mut prng);
        assert_eq!(elems, [0]);
        assert_eq!(prng, PrngState::new(42));
    }

    #[test]
    fn self_swaps_leave_array_unchanged() {
        let mut elems = [0, 1, 2, 3];
        permut_array(&mut elems, &mut Scripted::new(&[3, 2, 1]));
        assert_eq!(elems, [0, 1, 2, 3]);
    }

    #[test]
    fn zero_draws_rotate_left() {
        let expected = hand_trace(vec![0, 1, 2, 3], &[0, 0, 0]);
        assert_eq!(expected, [1, 2, 3, 0]);
        let mut elems = [0, 1, 2, 3];
        permut_array(&mut elems, &mut Scripted::new(&[0, 0, 0]));
        assert_eq!(elems.to_vec(), expected);
    }

    #[test]
    fn cycle_counts_one_shuffle_per_repetition() {
        let start = WorkArray::rotated(4).unwrap();
        let draws = [0usize, 0, 0];
        let traced = hand_trace(start.as_slice().to_vec(), &draws);
        assert_eq!(traced, [0, 1, 2, 3]);

        let indices: Vec<u32> = draws.iter().map(|&d| d as u32).collect();
        let mut clock = ScriptedClock::stepping(0, 1);
        let one = run_sorting_cycle(&start, 1, &mut Scripted::new(&indices), &mut clock).unwrap();
        assert_eq!(one.permutation_count, 1);
        assert_eq!(one.elapsed_ticks, 1);

        let four = run_sorting_cycle(&start, 4, &mut Scripted::new(&indices), &mut clock).unwrap();
        assert_eq!(four.permutation_count, 4);
    }

    #[test]
    fn cycle_rejects_bad_input() {
        let mut prng = PrngState::new(1);
        let mut clock = ScriptedClock::stepping(0, 1);
        let start = WorkArray::rotated(4).unwrap();
        assert!(matches!(
            run_sorting_cycle(&start, 0, &mut prng, &mut clock),
            Err(SortError::ZeroRepetitions)
        ));
        let sorted = WorkArray::new(&[0, 1, 2, 3]).unwrap();
        assert!(matches!(
            run_sorting_cycle(&sorted, 1, &mut prng, &mut clock),
            Err(SortError::AlreadySorted(_))
        ));
    }

    #[test]
    fn stuck_index_source_hits_cap() {
        // self-swaps never change [3,0,1,2]
        let start = WorkArray::rotated(4).unwrap();
        let mut stuck = Scripted::new(&[3, 2, 1]);
        assert!(matches!(
            sort_once(&start, &mut stuck),
            Err(SortError::ShuffleCapExceeded(SHUFFLE_CAP))
        ));
    }

    #[test]
    fn clock_errors_propagate() {
        let start = WorkArray::rotated(4).unwrap();
        let mut clock = ScriptedClock::absolute(vec![0]).unwrap();
        assert!(matches!(
            run_sorting_cycle(&start, 1, &mut PrngState::new(1), &mut clock),
            Err(SortError::Clock(ClockError::ScriptExhausted(1)))
        ));
    }

    #[test]
    fn fixed_seed_cycle_is_repeatable() {
        let start = WorkArray::rotated(4).unwrap();
        let counts: Vec<u64> = (0..5)
            .map(|_| {
                let mut prng = PrngState::new(77);
                let mut clock = ScriptedClock::stepping(0, 3);
                run_sorting_cycle(&start, 4, &mut prng, &mut clock)
                    .unwrap()
                    .permutation_count
            })
            .collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]));
        assert!(counts[0] >= 4);
    }

    proptest! {
        #[test]
        fn shuffle_preserves_elements(seed in any::<u64>(), len in 2usize..=8, rounds in 1usize..20) {
            let mut array = WorkArray::rotated(len).unwrap();
            let mut prng = PrngState::new(seed);
            for _ in 0..rounds {
                array.shuffle(&mut prng);
                let mut sorted = array.as_slice().to_vec();
                sorted.sort_unstable();
                prop_assert_eq!(sorted, (0..len as u8).collect::<Vec<_>>());
            }
        }

        #[test]
        fn cycle_needs_at_least_one_shuffle_per_repetition(seed in any::<u64>(), m in 1u32..6) {
            let start = WorkArray::rotated(4).unwrap();
            let mut clock = ScriptedClock::stepping(0, 1);
            let result = run_sorting_cycle(&start, m, &mut PrngState::new(seed), &mut clock).unwrap();
            prop_assert!(result.permutation_count >= u64::from(m));
        }
    }
}
