//! Seeded random streams and measurement outcome sources.
//!
//! `RandomStream` is ChaCha8: `(seed, stream)` selects an independent
//! counter-based keystream, so trial `i` of a campaign always draws from
//! substream `i` regardless of thread scheduling.

use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        self.inner.gen()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Source of projective measurement results for the angle qubit.
pub trait OutcomeSampler {
    /// Returns 0 with probability `p_zero`, else 1.
    fn sample(&mut self, p_zero: f64) -> u8;
}

impl OutcomeSampler for RandomStream {
    fn sample(&mut self, p_zero: f64) -> u8 {
        if self.next_unit() < p_zero {
            0
        } else {
            1
        }
    }
}

impl<S: OutcomeSampler + ?Sized> OutcomeSampler for &mut S {
    fn sample(&mut self, p_zero: f64) -> u8 {
        (**self).sample(p_zero)
    }
}

/// Scripted outcomes, for forcing failure sequences. Once the script runs
/// out every further measurement returns `then`.
#[derive(Debug, Clone)]
pub struct ForcedOutcomes {
    script: VecDeque<u8>,
    then: u8,
}

impl ForcedOutcomes {
    pub fn new(script: impl IntoIterator<Item = u8>, then: u8) -> Self {
        Self {
            script: script.into_iter().collect(),
            then,
        }
    }

    pub fn always(bit: u8) -> Self {
        Self::new([], bit)
    }

    /// `failures` ones followed by zeros.
    pub fn failures_then_success(failures: usize) -> Self {
        Self::new(std::iter::repeat_n(1, failures), 0)
    }
}

impl OutcomeSampler for ForcedOutcomes {
    fn sample(&mut self, _p_zero: f64) -> u8 {
        self.script.pop_front().unwrap_or(self.then)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = {
            let mut r = RandomStream::substream(42, 3);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let mut r = RandomStream::substream(42, 3);
        let b: Vec<u64> = (0..8).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn substreams_differ() {
        let mut a = RandomStream::substream(42, 0);
        let mut b = RandomStream::substream(42, 1);
        let mut c = RandomStream::substream(43, 0);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }

    #[test]
    fn forced_outcomes_follow_script() {
        let mut f = ForcedOutcomes::failures_then_success(2);
        assert_eq!(
            [f.sample(0.5), f.sample(0.5), f.sample(0.5), f.sample(0.5)],
            [1, 1, 0, 0]
        );
    }
}
