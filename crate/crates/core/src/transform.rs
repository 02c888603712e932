//! Affine frames: centering and rescaling a tail-bounded density into B(1/2),
//! rejection-based conditioning, and pulling hypotheses back to the original space.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::domain::{max_norm, norm, SampleSet, TailBound};
use crate::error::{Error, Result};
use crate::fourier::{Evaluator, FourierHypothesis};
use crate::oracle::Oracle;
use crate::rng::StreamRng;

/// Consecutive rejections after which a frame is declared inefficient.
pub const DEFAULT_MAX_REJECTS: u64 = 64;

/// Center μ̃ and squared-radius parameter t; maps B_t = {‖x−μ̃‖ ≤ √t} onto B(1/2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFrame {
    pub mu: Vec<f64>,
    pub t: f64,
}

impl AffineFrame {
    pub fn new(mu: Vec<f64>, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) || mu.is_empty() || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("invalid frame: mu={mu:?}, t={t}")));
        }
        Ok(AffineFrame { mu, t })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// 2√t.
    pub fn scale(&self) -> f64 {
        2.0 * self.t.sqrt()
    }

    /// y = (x − μ̃)/(2√t).
    pub fn forward(&self, x: &[f64], y: &mut [f64]) {
        let s = self.scale();
        for ((yj, xj), mj) in y.iter_mut().zip(x).zip(&self.mu) {
            *yj = (xj - mj) / s;
        }
    }

    /// x = μ̃ + 2√t·y.
    pub fn inverse(&self, y: &[f64], x: &mut [f64]) {
        let s = self.scale();
        for ((xj, yj), mj) in x.iter_mut().zip(y).zip(&self.mu) {
            *xj = mj + s * yj;
        }
    }

    pub fn forward_map(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.forward(x, &mut y);
        y
    }

    /// ‖x − μ̃‖ ≤ √t.
    pub fn contains(&self, x: &[f64]) -> bool {
        let r2: f64 = x.iter().zip(&self.mu).map(|(a, b)| (a - b) * (a - b)).sum();
        r2 <= self.t
    }
}

/// ⌈100·I_g⌉, the number of draws `compute_transformation` expects.
pub fn transformation_sample_count(tail: &TailBound) -> Result<usize> {
    Ok((100.0 * tail.integral()?).ceil() as usize)
}

/// μ̃ = empirical mean and t = 2·((g⁻¹(ε))² + 1/10).
pub fn compute_transformation(samples: &SampleSet, tail: &TailBound, eps: f64) -> Result<AffineFrame> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1/2), got {eps}")));
    }
    let m = transformation_sample_count(tail)?;
    if samples.len() != m {
        return Err(Error::Parameter(format!(
            "compute_transformation needs exactly {m} samples, got {}",
            samples.len()
        )));
    }
    let r = tail.inverse(eps)?;
    AffineFrame::new(samples.mean()?, 2.0 * (r * r + 0.1))
}

/// Draws from f, maps them through a frame and keeps those inside B(1/2).
pub struct Conditioned<'a, O: ?Sized> {
    inner: &'a O,
    frame: &'a AffineFrame,
    max_rejects: u64,
    attempts: AtomicU64,
    accepted: AtomicU64,
}

impl<'a, O: Oracle + ?Sized> Conditioned<'a, O> {
    pub fn new(inner: &'a O, frame: &'a AffineFrame, max_rejects: u64) -> Self {
        Conditioned {
            inner,
            frame,
            max_rejects,
            attempts: AtomicU64::new(0),
            accepted: AtomicU64::new(0),
        }
    }

    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    pub fn accepted(&self) -> u64 {
        self.accepted.load(Ordering::Relaxed)
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted() as f64 / self.attempts().max(1) as f64
    }
}

/// Oracle for f conditioned on B_t and mapped into B(1/2).
pub fn condition_and_map<'a, O: Oracle + ?Sized>(
    oracle: &'a O,
    frame: &'a AffineFrame,
    max_rejects: u64,
) -> Conditioned<'a, O> {
    Conditioned::new(oracle, frame, max_rejects)
}

impl<O: Oracle + ?Sized> Oracle for Conditioned<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        let mut x = vec![0.0; out.len()];
        let mut raw = 0;
        let mut run = 0;
        loop {
            raw += self.inner.draw(rng, &mut x)?;
            self.attempts.fetch_add(1, Ordering::Relaxed);
            self.frame.forward(&x, out);
            if norm(out) <= 0.5 {
                self.accepted.fetch_add(1, Ordering::Relaxed);
                return Ok(raw);
            }
            run += 1;
            if run >= self.max_rejects {
                return Err(Error::Stalled { trials: run });
            }
        }
    }
}

/// Invertible affine map x = A·y + b between conditioned coordinates y and original space x.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    d: usize,
    a: Vec<f64>,
    a_inv: Vec<f64>,
    b: Vec<f64>,
    abs_det: f64,
}

impl AffineMap {
    pub fn from_frame(frame: &AffineFrame) -> Self {
        let d = frame.dim();
        let s = frame.scale();
        let mut a = vec![0.0; d * d];
        let mut a_inv = vec![0.0; d * d];
        for j in 0..d {
            a[j * d + j] = s;
            a_inv[j * d + j] = 1.0 / s;
        }
        AffineMap {
            d,
            a,
            a_inv,
            b: frame.mu.clone(),
            abs_det: s.powi(d as i32),
        }
    }

    /// General map from row-major A (invertible) and offset b.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let d = b.len();
        if a.len() != d * d || d == 0 {
            return Err(Error::Parameter("affine map needs a d×d matrix and a d-vector".into()));
        }
        let m = nalgebra::DMatrix::from_row_slice(d, d, &a);
        let det = m.determinant();
        let inv = m
            .try_inverse()
            .filter(|_| det.abs() > 0.0 && det.is_finite())
            .ok_or_else(|| Error::Degenerate("affine map is not invertible".into()))?;
        let a_inv = (0..d * d).map(|k| inv[(k / d, k % d)]).collect();
        Ok(AffineMap {
            d,
            a,
            a_inv,
            b,
            abs_det: det.abs(),
        })
    }

    /// The map x ↦ L·x + c applied after this one.
    pub fn then(&self, l: &[f64], c: &[f64]) -> Result<AffineMap> {
        let d = self.d;
        let mut a = vec![0.0; d * d];
        let mut b = c.to_vec();
        for i in 0..d {
            for k in 0..d {
                b[i] += l[i * d + k] * self.b[k];
                for j in 0..d {
                    a[i * d + j] += l[i * d + k] * self.a[k * d + j];
                }
            }
        }
        AffineMap::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        &self.b
    }

    /// |det A|, the volume factor from conditioned to original coordinates.
    pub fn abs_det(&self) -> f64 {
        self.abs_det
    }

    pub fn to_original(&self, y: &[f64], x: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            x[i] = self.b[i] + (0..d).map(|j| self.a[i * d + j] * y[j]).sum::<f64>();
        }
    }

    pub fn to_conditioned(&self, x: &[f64], y: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            y[i] = (0..d).map(|j| self.a_inv[i * d + j] * (x[j] - self.b[j])).sum::<f64>();
        }
    }
}

/// h(x) = h_s(A⁻¹(x − b))/|det A| on the image of [−1,1]^d, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct PulledBack {
    pub inner: FourierHypothesis,
    pub map: AffineMap,
}

impl PulledBack {
    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Density evaluator with its own scratch space.
    pub fn density(&self) -> PulledBackEval<'_> {
        PulledBackEval {
            ev: self.inner.evaluator(),
            map: &self.map,
            y: vec![0.0; self.dim()],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.density().eval(x)
    }
}

pub struct PulledBackEval<'a> {
    ev: Evaluator<'a>,
    map: &'a AffineMap,
    y: Vec<f64>,
}

impl PulledBackEval<'_> {
    pub fn eval(&mut self, x: &[f64]) -> f64 {
        self.map.to_conditioned(x, &mut self.y);
        if max_norm(&self.y) > 1.0 {
            return 0.0;
        }
        self.ev.value(&self.y) / self.map.abs_det()
    }
}

/// h(x) = (2√t)^{−d}·h_s((x − μ̃)/(2√t)).
pub fn pull_back_hypothesis(h_scond: FourierHypothesis, frame: &AffineFrame) -> PulledBack {
    PulledBack {
        inner: h_scond,
        map: AffineMap::from_frame(frame),
    }
}
