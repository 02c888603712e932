//! Sample oracles: sources of independent draws addressed by an explicit generator.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::Result;
use crate::rng::{Stream, StreamRng};
use crate::SampleSet;

/// A source of i.i.d. draws from some density on R^d.
///
/// `draw` writes one point into `out` and returns how many raw draws from the
/// underlying distribution it consumed (more than one for rejection-based oracles).
pub trait Oracle: Sync {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        (**self).draw(rng, out)
    }
}

/// Oracle backed by a closure.
pub struct FnOracle<F> {
    dim: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOracle { dim, f }
    }
}

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        (self.f)(rng, out);
        Ok(1)
    }
}

/// Draws uniformly with replacement from a fixed sample set.
pub struct Resample<'a> {
    pub samples: &'a SampleSet,
}

impl Oracle for Resample<'_> {
    fn dim(&self) -> usize {
        self.samples.dim()
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        let i = rng.random_range(0..self.samples.len());
        out.copy_from_slice(self.samples.point(i));
        Ok(1)
    }
}

/// Wraps an oracle and counts the raw draws taken through it.
pub struct Counted<O> {
    pub inner: O,
    count: AtomicU64,
}

impl<O: Oracle> Counted<O> {
    pub fn new(inner: O) -> Self {
        Counted {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

impl<O: Oracle> Oracle for Counted<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        let k = self.inner.draw(rng, out)?;
        self.count.fetch_add(k, Ordering::Relaxed);
        Ok(k)
    }
}

/// Draws `n` points sequentially from one stream.
pub fn draw_n<O: Oracle + ?Sized>(oracle: &O, n: usize, stream: Stream) -> Result<(SampleSet, u64)> {
    let d = oracle.dim();
    let mut rng = stream.rng();
    let mut s = SampleSet::with_capacity(d, n);
    let mut buf = vec![0.0; d];
    let mut raw = 0;
    for _ in 0..n {
        raw += oracle.draw(&mut rng, &mut buf)?;
        s.push(&buf);
    }
    s.provenance = Some(stream.id());
    Ok((s, raw))
}
