//! Seedable random streams and the squared-row-norm sampler.
//!
//! `Prng` wraps ChaCha8 (2^64 blocks per stream, 2^64 streams). A worker's
//! stream is the ChaCha stream `worker_id` under key `seed_from_u64(seed)`,
//! so worker 0 and the sequential solvers draw exactly the same numbers for a
//! given seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{block_bounds, RowNormCache};

#[derive(Debug, Clone)]
pub struct Prng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl Prng {
    /// The stream used by sequential solvers; identical to `worker(seed, 0)`.
    pub fn new(seed: u64) -> Self {
        Self::worker(seed, 0)
    }

    pub fn worker(base_seed: u64, worker_id: usize) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(base_seed);
        inner.set_stream(worker_id as u64);
        Self {
            inner,
            seed: base_seed,
            stream: worker_id as u64,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

/// Same as [`Prng::worker`].
pub fn worker_rng(base_seed: u64, worker_id: usize) -> Prng {
    Prng::worker(base_seed, worker_id)
}

impl RngCore for Prng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Discrete distribution over rows `lo..=hi` with P(i) ∝ ‖A⁽ⁱ⁾‖².
///
/// Draws take one uniform variate and binary-search the cumulative table.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSampler {
    cdf: Vec<f64>,
    lo: usize,
}

impl RowSampler {
    /// Sampler over `offset..offset + weights.len()`. Weights must be
    /// strictly positive and finite.
    pub fn from_weights(weights: &[f64], offset: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Range {
                lo: offset,
                hi: offset,
                rows: 0,
            });
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::DegenerateRow { row: offset + i });
        }
        let total: f64 = weights.iter().sum();
        let mut running = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                running += w;
                running / total
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { cdf, lo: offset })
    }

    pub fn support_lo(&self) -> usize {
        self.lo
    }

    pub fn support_hi(&self) -> usize {
        self.lo + self.cdf.len() - 1
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability of drawing global row `i`, recovered from the table.
    pub fn probability(&self, i: usize) -> f64 {
        if i < self.lo || i > self.support_hi() {
            return 0.0;
        }
        let k = i - self.lo;
        if k == 0 {
            self.cdf[0]
        } else {
            self.cdf[k] - self.cdf[k - 1]
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut Prng) -> usize {
        let u = rng.next_f64();
        let k = self.cdf.partition_point(|&c| c <= u);
        self.lo + k.min(self.cdf.len() - 1)
    }
}

/// Sampler over rows `lo..=hi` of the matrix behind `cache`.
pub fn make_sampler(cache: &RowNormCache, lo: usize, hi: usize) -> Result<RowSampler> {
    let rows = cache.sq_norms().len();
    if lo > hi || hi >= rows {
        return Err(Error::Range { lo, hi, rows });
    }
    RowSampler::from_weights(&cache.sq_norms()[lo..=hi], lo)
}

/// Inclusive row range owned by worker `t` of `q`:
/// `⌊t·m/q⌋ ..= ⌊(t+1)·m/q⌋ − 1`. Fails when the range is empty.
pub fn worker_rows(t: usize, q: usize, m: usize) -> Result<(usize, usize)> {
    let r = block_bounds(t, q, m);
    if r.is_empty() {
        return Err(Error::Range {
            lo: r.start,
            hi: r.end.saturating_sub(1),
            rows: m,
        });
    }
    Ok((r.start, r.end - 1))
}
