//! Deterministic parallel accumulation of Monte Carlo statistics.
//!
//! Replications are cut into fixed chunks of `CHUNK` consecutive indices. Each
//! chunk is accumulated serially; chunk summaries are merged left to right.
//! The result is therefore independent of the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const CHUNK: u64 = 4096;

/// Redraws allowed per replication before giving up.
pub const MAX_ATTEMPTS: u32 = 32;

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accumulated<const K: usize> {
    pub stats: [Welford; K],
    /// Draws rejected because they hit a singular set.
    pub rejections: u64,
}

/// Evaluates `f(index, attempt)` for `index in 0..n`, redrawing on singular
/// draws, and accumulates the `K` returned statistics.
pub fn accumulate<const K: usize, F>(n: u64, threads: Option<usize>, f: F) -> Result<Accumulated<K>>
where
    F: Fn(u64, u32) -> Result<[f64; K]> + Sync,
{
    if n == 0 {
        return Err(Error::EmptyInput("replication count must be positive".into()));
    }
    let run = || -> Result<Accumulated<K>> {
        let chunks = n.div_ceil(CHUNK);
        let parts = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut stats = [Welford::default(); K];
                let mut rejections = 0;
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let mut attempt = 0;
                    let values = loop {
                        match f(i, attempt) {
                            Ok(v) => break v,
                            Err(e) if e.is_singular_draw() => {
                                rejections += 1;
                                attempt += 1;
                                if attempt >= MAX_ATTEMPTS {
                                    return Err(Error::RejectionLimit { index: i, attempts: attempt });
                                }
                            }
                            Err(e) => return Err(e),
                        }
                    };
                    for (s, v) in stats.iter_mut().zip(values) {
                        s.push(v);
                    }
                }
                Ok(Accumulated { stats, rejections })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = Accumulated { stats: [Welford::default(); K], rejections: 0 };
        for part in &parts {
            for (t, s) in total.stats.iter_mut().zip(&part.stats) {
                t.merge(s);
            }
            total.rejections += part.rejections;
        }
        Ok(total)
    };
    match threads {
        None => run(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidSpec(format!("cannot build a {t}-thread pool: {e}")))?
            .install(run),
    }
}
