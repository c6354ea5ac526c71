use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerMode {
    /// One batch per search direction, refreshed explicitly.
    Static,
    /// A fresh batch for every evaluation.
    Dynamic,
    /// The whole training split every time.
    Full,
}

impl SamplerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerMode::Static => "static",
            SamplerMode::Dynamic => "dynamic",
            SamplerMode::Full => "full",
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(SamplerMode::Static),
            "dynamic" => Ok(SamplerMode::Dynamic),
            "full" => Ok(SamplerMode::Full),
            other => Err(Error::Config(format!("unknown sampler mode {other:?}"))),
        }
    }
}

/// Draws mini-batches of positions in `0..population`.
///
/// Within a batch indices are distinct; successive batches are independent
/// draws, so an index can appear in consecutive batches.
#[derive(Debug, Clone)]
pub struct MiniBatchSampler {
    mode: SamplerMode,
    m: usize,
    population: usize,
    rng: ChaCha8Rng,
    current: Vec<usize>,
}

impl MiniBatchSampler {
    /// `m` is ignored in full mode.
    pub fn new(mode: SamplerMode, m: usize, population: usize, seed: u64) -> Result<Self> {
        let m = if mode == SamplerMode::Full { population } else { m };
        if m == 0 || m > population {
            return Err(Error::BadBatchSize { m, population });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let current = match mode {
            SamplerMode::Static => draw(&mut rng, population, m),
            SamplerMode::Full => (0..population).collect(),
            SamplerMode::Dynamic => Vec::new(),
        };
        Ok(Self { mode, m, population, rng, current })
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.m
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        match self.mode {
            SamplerMode::Dynamic => draw(&mut self.rng, self.population, self.m),
            SamplerMode::Static | SamplerMode::Full => self.current.clone(),
        }
    }

    /// Replaces the held batch. Only meaningful for static sampling.
    pub fn refresh_static(&mut self) -> Result<()> {
        if self.mode != SamplerMode::Static {
            return Err(Error::WrongMode { expected: "static", actual: self.mode.as_str() });
        }
        self.current = draw(&mut self.rng, self.population, self.m);
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, population: usize, m: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, population, m).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_mode_is_everything() {
        let mut s = MiniBatchSampler::new(SamplerMode::Full, 1, 400, 0).unwrap();
        assert_eq!(s.next_batch(), (0..400).collect::<Vec<_>>());
        assert_eq!(s.batch_size(), 400);
    }

    #[test]
    fn static_mode_holds_its_batch() {
        let mut s = MiniBatchSampler::new(SamplerMode::Static, 50, 400, 1).unwrap();
        let a = s.next_batch();
        assert_eq!(a, s.next_batch());
        s.refresh_static().unwrap();
        let b = s.next_batch();
        assert_eq!(b, s.next_batch());
        assert_ne!(a, b);
    }

    #[test]
    fn refresh_in_other_modes_fails() {
        for mode in [SamplerMode::Full, SamplerMode::Dynamic] {
            let mut s = MiniBatchSampler::new(mode, 10, 400, 0).unwrap();
            assert!(matches!(s.refresh_static(), Err(Error::WrongMode { .. })));
        }
    }

    #[test]
    fn oversized_batch_is_rejected() {
        assert!(matches!(
            MiniBatchSampler::new(SamplerMode::Dynamic, 401, 400, 0),
            Err(Error::BadBatchSize { m: 401, population: 400 })
        ));
        assert!(MiniBatchSampler::new(SamplerMode::Static, 0, 400, 0).is_err());
    }

    #[test]
    fn dynamic_inclusion_frequency() {
        // Each index should appear in m/M = 0.125 of the batches. Per-index
        // counts are Binomial(1000, 0.125) with sd ≈ 0.0105, so ±0.02 is a
        // 1.9σ band: about 94% of indices land inside it, and none should
        // stray past 0.05 (4.8σ).
        let mut s = MiniBatchSampler::new(SamplerMode::Dynamic, 50, 400, 42).unwrap();
        let mut hits = vec![0usize; 400];
        let calls = 1000;
        for _ in 0..calls {
            for i in s.next_batch() {
                hits[i] += 1;
            }
        }
        let freqs: Vec<f64> = hits.iter().map(|&h| h as f64 / calls as f64).collect();
        let inside = freqs.iter().filter(|f| (*f - 0.125).abs() <= 0.02).count();
        assert!(inside as f64 >= 0.9 * 400.0, "only {inside} of 400 within ±0.02");
        assert!(freqs.iter().all(|f| (f - 0.125).abs() < 0.05));
        let mean = freqs.iter().sum::<f64>() / 400.0;
        assert!((mean - 0.125).abs() < 1e-12);
    }

    #[test]
    fn refreshed_batches_differ() {
        // Two independent 50-of-400 draws coincide with probability
        // 1/C(400,50) < 1e-60, far below the 1e-6 bound.
        let mut s = MiniBatchSampler::new(SamplerMode::Static, 50, 400, 9).unwrap();
        let mut prev = s.next_batch();
        prev.sort_unstable();
        for _ in 0..1000 {
            s.refresh_static().unwrap();
            let mut cur = s.next_batch();
            cur.sort_unstable();
            assert_ne!(prev, cur);
            prev = cur;
        }
    }

    #[test]
    fn batches_have_no_duplicates_and_are_reproducible() {
        let mut a = MiniBatchSampler::new(SamplerMode::Dynamic, 64, 100, 5).unwrap();
        let mut b = MiniBatchSampler::new(SamplerMode::Dynamic, 64, 100, 5).unwrap();
        for _ in 0..50 {
            let x = a.next_batch();
            assert_eq!(x, b.next_batch());
            let mut sorted = x.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 64);
        }
    }
}
