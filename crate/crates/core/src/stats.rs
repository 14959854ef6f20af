//! Streaming moments and the deterministic replica reduction.

use num_complex::Complex64;
use rayon::prelude::*;
use std::ops::Range;

/// Replicas per work item. Partial results are merged in chunk order, so the
/// reduction tree is fixed and independent of the number of worker threads.
pub const CHUNK: usize = 256;

/// Running mean and variance (Welford), mergeable with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean(),
            stderr: self.stderr(),
        }
    }
}

/// Component-wise moments of a complex statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexMeanVar {
    pub re: MeanVar,
    pub im: MeanVar,
}

impl ComplexMeanVar {
    #[inline]
    pub fn push(&mut self, z: Complex64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn merge(&mut self, other: &ComplexMeanVar) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn estimate(&self) -> ComplexEstimate {
        ComplexEstimate {
            value: Complex64::new(self.re.mean(), self.im.mean()),
            stderr_re: self.re.stderr(),
            stderr_im: self.im.stderr(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub value: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

impl ComplexEstimate {
    /// Larger of the two component standard errors.
    pub fn stderr_max(&self) -> f64 {
        self.stderr_re.max(self.stderr_im)
    }
}

/// Anything that can absorb another partial result of the same shape.
pub trait Merge {
    fn merge_from(&mut self, other: Self);
}

impl Merge for MeanVar {
    fn merge_from(&mut self, other: Self) {
        self.merge(&other);
    }
}

impl Merge for ComplexMeanVar {
    fn merge_from(&mut self, other: Self) {
        self.merge(&other);
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge_from(&mut self, other: Self) {
        assert_eq!(self.len(), other.len(), "merging partial results of different shape");
        for (a, b) in self.iter_mut().zip(other) {
            a.merge_from(b);
        }
    }
}

/// Run `body` over replica indices `0..reps` in fixed chunks of [`CHUNK`],
/// in parallel, and merge the per-chunk accumulators in chunk order.
///
/// `body` receives the replica range of one chunk and the chunk's fresh
/// accumulator; it may keep scratch buffers local to the call.
pub fn reduce_replicas<A, M, F>(reps: usize, make: M, body: F) -> A
where
    A: Merge + Send,
    M: Fn() -> A + Sync,
    F: Fn(Range<usize>, &mut A) + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = make();
            body(c * CHUNK..((c + 1) * CHUNK).min(reps), &mut acc);
            acc
        })
        .collect();
    let mut total = make();
    for p in parts {
        total.merge_from(p);
    }
    total
}

/// Run `f` inside a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
