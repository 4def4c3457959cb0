//! Seeded Gaussian noise shared by every SDE in the crate.
//!
//! Streams are keyed by `(seed, stream_index)` on a ChaCha8 generator, so an
//! ensemble member always sees the same increments no matter which worker
//! thread simulates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{param_err, Result};

/// Largest number of increments a single path may hold.
pub const MAX_STEPS: usize = 100_000_000;

/// Builds the generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of grid steps needed to cover `[0, horizon]` with step `dt`.
///
/// A relative slack of 1e-9 absorbs the rounding in `horizon / dt` so that
/// `(1, 1e-4)` yields 10^4 steps rather than 10^4 + 1.
pub fn steps_for(horizon: f64, dt: f64) -> usize {
    let ratio = horizon / dt;
    let n = (ratio * (1.0 - 1e-12) - 1e-9).ceil();
    n.max(0.0) as usize
}

/// Unbounded iterator of N(0, dt) increments.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl NoiseStream {
    pub fn new(dt: f64, seed: u64, stream: u64) -> Self {
        Self {
            rng: stream_rng(seed, stream),
            sqrt_dt: dt.sqrt(),
        }
    }
}

impl Iterator for NoiseStream {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        Some(z * self.sqrt_dt)
    }
}

/// Discrete Brownian increments on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl BrownianPath {
    /// Samples `ceil(horizon / dt)` increments from stream 0 of `seed`.
    pub fn sample(horizon: f64, dt: f64, seed: u64) -> Result<Self> {
        Self::sample_stream(horizon, dt, seed, 0)
    }

    /// Samples from an explicit stream; ensembles use the sample index.
    pub fn sample_stream(horizon: f64, dt: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return param_err!("horizon must be positive, got {horizon}");
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return param_err!("dt must be positive, got {dt}");
        }
        if dt > horizon * (1.0 + 1e-12) {
            return param_err!("dt = {dt} exceeds horizon {horizon}");
        }
        let n = steps_for(horizon, dt);
        if n > MAX_STEPS {
            return param_err!("{n} steps exceeds the cap of {MAX_STEPS}");
        }
        let increments = NoiseStream::new(dt, seed, stream).take(n).collect();
        Ok(Self {
            seed,
            stream,
            dt,
            increments,
        })
    }

    /// A zero-length path (no steps), useful for identity checks.
    pub fn empty(dt: f64, seed: u64) -> Self {
        Self {
            seed,
            stream: 0,
            dt,
            increments: Vec::new(),
        }
    }

    /// Wraps externally produced increments.
    pub fn from_increments(dt: f64, increments: Vec<f64>) -> Self {
        Self {
            seed: 0,
            stream: 0,
            dt,
            increments,
        }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.len() as f64
    }

    /// Grid times `0, dt, ..., N dt` (N + 1 values).
    pub fn times(&self) -> Vec<f64> {
        (0..=self.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Partial sums `B_0 = 0, B_1, ..., B_N`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &db in &self.increments {
            acc += db;
            out.push(acc);
        }
        out
    }

    /// Sums blocks of `factor` increments: the same Brownian path seen on a
    /// grid `factor` times coarser. Trailing increments that do not fill a
    /// block are dropped.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return param_err!("coarsening factor must be at least 1");
        }
        let increments = self
            .increments
            .chunks_exact(factor)
            .map(|c| c.iter().sum())
            .collect();
        Ok(Self {
            seed: self.seed,
            stream: self.stream,
            dt: self.dt * factor as f64,
            increments,
        })
    }

    /// First `n` increments.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            seed: self.seed,
            stream: self.stream,
            dt: self.dt,
            increments: self.increments[..n.min(self.len())].to_vec(),
        }
    }

    /// The same path with every increment negated.
    pub fn negated(&self) -> Self {
        Self {
            increments: self.increments.iter().map(|x| -x).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_is_reproducible() {
        let a = BrownianPath::sample(1.0, 1.0, 7).unwrap();
        let b = BrownianPath::sample(1.0, 1.0, 7).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.increments[0].to_bits(), b.increments[0].to_bits());
    }

    #[test]
    fn step_count_rounds_sensibly() {
        assert_eq!(steps_for(1.0, 1e-4), 10_000);
        assert_eq!(steps_for(1.0, 1e-5), 100_000);
        assert_eq!(steps_for(1.0, 0.3), 4);
        assert_eq!(steps_for(0.1, 1e-3), 100);
    }

    #[test]
    fn variance_matches_dt() {
        let p = BrownianPath::sample(1.0, 1e-4, 11).unwrap();
        let n = p.len() as f64;
        let mean = p.increments.iter().sum::<f64>() / n;
        let var = p.increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.9e-4..=1.1e-4).contains(&var), "var = {var}");
        let scaled_mean = mean / 1e-4f64.sqrt();
        assert!(scaled_mean.abs() <= 4.0 / n.sqrt());
    }

    #[test]
    fn distinct_seeds_differ() {
        let a = BrownianPath::sample(1.0, 1e-4, 3).unwrap();
        let b = BrownianPath::sample(1.0, 1e-4, 4).unwrap();
        assert_ne!(a.increments[0], b.increments[0]);
        let c = BrownianPath::sample_stream(1.0, 1e-4, 3, 1).unwrap();
        assert_ne!(a.increments[0], c.increments[0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BrownianPath::sample(0.0, 0.1, 1).is_err());
        assert!(BrownianPath::sample(1.0, -0.1, 1).is_err());
        assert!(BrownianPath::sample(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn coarsening_preserves_endpoint() {
        let p = BrownianPath::sample(1.0, 1.0 / 64.0, 5).unwrap();
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.len(), 16);
        let end_fine = *p.cumulative().last().unwrap();
        let end_coarse = *c.cumulative().last().unwrap();
        assert!((end_fine - end_coarse).abs() < 1e-12);
    }

    #[test]
    fn stream_prefix_property() {
        let short = BrownianPath::sample(0.5, 1e-3, 9).unwrap();
        let long = BrownianPath::sample(1.0, 1e-3, 9).unwrap();
        assert_eq!(short.increments[..], long.increments[..short.len()]);
    }
}
