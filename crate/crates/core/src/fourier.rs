//! Integer frequency lattice on [−1,1]^d, empirical coefficient estimation,
//! truncated inversion and Parseval utilities.
//!
//! Analysis uses e^{−iπ⟨ξ,x⟩} and synthesis u(z) = 2^{−d}·Σ û(ξ)·e^{+iπ⟨ξ,z⟩},
//! so that inverting the coefficients of a density on [−1,1]^d returns it.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{f17s, unwrap17, F17};
use crate::par;
use crate::transform::AffineFrame;
use crate::SampleSet;

/// Default ceiling on |Low|.
pub const DEFAULT_LOW_CAP: u64 = 100_000_000;

// recurrences for e^{ikθ} are re-anchored with a fresh sin/cos this often
const ANCHOR: usize = 64;

/// All ξ ∈ Z^d with ‖ξ‖∞ ≤ T, in lexicographic order (first coordinate most significant).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencySet {
    d: usize,
    t: usize,
    len: usize,
}

impl FrequencySet {
    pub fn build(d: usize, t: usize) -> Result<Self> {
        Self::build_capped(d, t, DEFAULT_LOW_CAP)
    }

    pub fn build_capped(d: usize, t: usize, cap: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        let side = 2 * t as u128 + 1;
        let n = side
            .checked_pow(d as u32)
            .filter(|&n| n <= cap as u128)
            .ok_or_else(|| {
                Error::Resource(format!("|Low| = (2*{t}+1)^{d} exceeds the cap of {cap} frequencies (T = {t})"))
            })?;
        Ok(FrequencySet {
            d,
            t,
            len: n as usize,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// The cutoff T.
    pub fn cutoff(&self) -> usize {
        self.t
    }

    /// 2T + 1.
    pub fn side(&self) -> usize {
        2 * self.t + 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of ξ = 0.
    pub fn center(&self) -> usize {
        (self.len - 1) / 2
    }

    /// Index of −ξ given the index of ξ.
    pub fn mirror(&self, i: usize) -> usize {
        self.len - 1 - i
    }

    /// (2T+1)^{d−1}: frequencies per value of the first coordinate.
    pub fn row_len(&self) -> usize {
        self.len / self.side()
    }

    /// Index of the first ξ with ξ₁ = 0; indices from here on have ξ₁ ≥ 0.
    pub fn half_start(&self) -> usize {
        self.t * self.row_len()
    }

    pub fn xi(&self, mut i: usize) -> Vec<i64> {
        let side = self.side();
        let mut out = vec![0i64; self.d];
        for j in (0..self.d).rev() {
            out[j] = (i % side) as i64 - self.t as i64;
            i /= side;
        }
        out
    }

    pub fn index_of(&self, xi: &[i64]) -> Option<usize> {
        if xi.len() != self.d {
            return None;
        }
        let t = self.t as i64;
        let mut idx = 0usize;
        for &k in xi {
            if k.abs() > t {
                return None;
            }
            idx = idx * self.side() + (k + t) as usize;
        }
        Some(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len).map(|i| self.xi(i))
    }
}

/// e^{ikθ} for k = 0..re.len(), by recurrence with periodic re-anchoring.
fn cis_run(theta: f64, re: &mut [f64], im: &mut [f64]) {
    let (ws, wc) = theta.sin_cos();
    let (mut zr, mut zi) = (1.0, 0.0);
    for k in 0..re.len() {
        if k % ANCHOR == 0 && k > 0 {
            let (s, c) = (k as f64 * theta).sin_cos();
            zr = c;
            zi = s;
        }
        re[k] = zr;
        im[k] = zi;
        let nr = zr * wc - zi * ws;
        zi = zr * ws + zi * wc;
        zr = nr;
    }
}

/// e^{ikθ} for k = −T..T into `out` (length 2T+1).
fn cis_table(theta: f64, t: usize, out: &mut [C64]) {
    let (ws, wc) = theta.sin_cos();
    let w = C64::new(wc, ws);
    let mut z = C64::new(1.0, 0.0);
    for k in 0..=t {
        if k % ANCHOR == 0 && k > 0 {
            let (s, c) = (k as f64 * theta).sin_cos();
            z = C64::new(c, s);
        }
        out[t + k] = z;
        out[t - k] = z.conj();
        z *= w;
    }
}

/// Running sums Σ_x e^{−iπ⟨ξ,x⟩} over the half lattice ξ₁ ≥ 0.
#[derive(Clone, Debug)]
pub struct CoefficientSums {
    freqs: FrequencySet,
    re: Vec<f64>,
    im: Vec<f64>,
    count: u64,
}

const LANES: usize = 8;
// samples per GEMM panel in d ≥ 2
const PANEL: usize = 64;

impl CoefficientSums {
    pub fn new(freqs: FrequencySet) -> Self {
        let half = (freqs.cutoff() + 1) * freqs.row_len();
        CoefficientSums {
            freqs,
            re: vec![0.0; half],
            im: vec![0.0; half],
            count: 0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Adds row-major points (caller has checked they lie in [−1,1]^d).
    pub fn add_points(&mut self, pts: &[f64]) {
        let d = self.freqs.dim();
        debug_assert_eq!(pts.len() % d, 0);
        self.count += (pts.len() / d) as u64;
        if d == 1 {
            self.add_1d(pts);
        } else {
            for panel in pts.chunks(PANEL * d) {
                self.add_panel(panel);
            }
        }
    }

    fn add_1d(&mut self, xs: &[f64]) {
        let t = self.freqs.cutoff();
        let rows = t + 1;
        let mut acc_r = vec![0.0; rows * LANES];
        let mut acc_i = vec![0.0; rows * LANES];
        for chunk in xs.chunks(LANES) {
            let mut x = [0.0; LANES];
            let mut live = [0.0; LANES];
            for (l, &v) in chunk.iter().enumerate() {
                x[l] = v;
                live[l] = 1.0;
            }
            let mut wr = [0.0; LANES];
            let mut wi = [0.0; LANES];
            for l in 0..LANES {
                let (s, c) = (PI * x[l]).sin_cos();
                wr[l] = c;
                wi[l] = -s;
            }
            let mut zr = live;
            let mut zi = [0.0; LANES];
            let mut k = 0;
            while k < rows {
                if k > 0 {
                    for l in 0..LANES {
                        let (s, c) = (PI * k as f64 * x[l]).sin_cos();
                        zr[l] = c * live[l];
                        zi[l] = -s * live[l];
                    }
                }
                let stop = (k + ANCHOR).min(rows);
                for kk in k..stop {
                    let ar = &mut acc_r[kk * LANES..(kk + 1) * LANES];
                    let ai = &mut acc_i[kk * LANES..(kk + 1) * LANES];
                    for l in 0..LANES {
                        ar[l] += zr[l];
                        ai[l] += zi[l];
                        let nr = zr[l] * wr[l] - zi[l] * wi[l];
                        zi[l] = zr[l] * wi[l] + zi[l] * wr[l];
                        zr[l] = nr;
                    }
                }
                k = stop;
            }
        }
        for kk in 0..rows {
            let sr: f64 = acc_r[kk * LANES..(kk + 1) * LANES].iter().sum();
            let si: f64 = acc_i[kk * LANES..(kk + 1) * LANES].iter().sum();
            self.re[kk] += sr;
            self.im[kk] += si;
        }
    }

    fn add_panel(&mut self, pts: &[f64]) {
        let d = self.freqs.dim();
        let t = self.freqs.cutoff();
        let side = self.freqs.side();
        let rows = t + 1;
        let r = self.freqs.row_len();
        let m = pts.len() / d;

        // A: m × rows with e^{−iπ k x₁}, k = 0..T
        let mut ar = vec![0.0; m * rows];
        let mut ai = vec![0.0; m * rows];
        // B: m × r with ∏_{j≥2} e^{−iπ ξ_j x_j}, lexicographic in (ξ₂..ξ_d)
        let mut br = vec![0.0; m * r];
        let mut bi = vec![0.0; m * r];
        let mut tab = vec![C64::new(0.0, 0.0); side];
        let mut kron: Vec<C64> = Vec::with_capacity(r);
        let mut next: Vec<C64> = Vec::with_capacity(r);
        for (s, x) in pts.chunks_exact(d).enumerate() {
            cis_run(-PI * x[0], &mut ar[s * rows..(s + 1) * rows], &mut ai[s * rows..(s + 1) * rows]);
            kron.clear();
            kron.push(C64::new(1.0, 0.0));
            for &xj in &x[1..] {
                cis_table(-PI * xj, t, &mut tab);
                next.clear();
                for &a in kron.iter() {
                    next.extend(tab.iter().map(|&b| a * b));
                }
                std::mem::swap(&mut kron, &mut next);
            }
            for (c, z) in kron.iter().enumerate() {
                br[s * r + c] = z.re;
                bi[s * r + c] = z.im;
            }
        }
        // C += Aᵀ B, complex, as four real products
        let gemm = |alpha: f64, a: &[f64], b: &[f64], c: &mut [f64]| unsafe {
            matrixmultiply::dgemm(
                rows,
                m,
                r,
                alpha,
                a.as_ptr(),
                1,
                rows as isize,
                b.as_ptr(),
                r as isize,
                1,
                1.0,
                c.as_mut_ptr(),
                r as isize,
                1,
            );
        };
        gemm(1.0, &ar, &br, &mut self.re);
        gemm(-1.0, &ai, &bi, &mut self.re);
        gemm(1.0, &ar, &bi, &mut self.im);
        gemm(1.0, &ai, &br, &mut self.im);
    }

    pub fn merge(&mut self, other: &CoefficientSums) {
        debug_assert_eq!(self.freqs, other.freqs);
        self.re.iter_mut().zip(&other.re).for_each(|(a, b)| *a += b);
        self.im.iter_mut().zip(&other.im).for_each(|(a, b)| *a += b);
        self.count += other.count;
    }

    /// Empirical coefficients; the lower half is filled by conjugate symmetry and û(0) = 1.
    pub fn finish(self, clip: bool) -> Result<FourierHypothesis> {
        if self.count == 0 {
            return Err(Error::Domain("estimators need a nonempty sample set".into()));
        }
        let f = self.freqs;
        let n = f.len();
        let s = self.count as f64;
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        let hs = f.half_start();
        for j in 0..self.re.len() {
            coeffs[hs + j] = C64::new(self.re[j] / s, self.im[j] / s);
        }
        let c = f.center();
        coeffs[c] = C64::new(1.0, 0.0);
        for i in 0..c {
            coeffs[i] = coeffs[n - 1 - i].conj();
        }
        Ok(FourierHypothesis {
            freqs: f,
            coeffs,
            clip,
            hermitian: true,
        })
    }
}

fn check_cube(pts: &[f64]) -> Result<()> {
    if let Some(v) = pts.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Domain(format!("coordinate {v} lies outside [-1, 1]")));
    }
    Ok(())
}

/// û(ξ) = (1/S)·Σ_t e^{−iπ⟨ξ,x_t⟩} for every ξ in `freqs`; returns an unclipped hypothesis.
pub fn estimate_coefficients(samples: &SampleSet, freqs: FrequencySet) -> Result<FourierHypothesis> {
    samples.require_nonempty()?;
    if samples.dim() != freqs.dim() {
        return Err(Error::Domain(format!(
            "samples have dimension {} but the lattice has dimension {}",
            samples.dim(),
            freqs.dim()
        )));
    }
    check_cube(samples.as_flat())?;
    let n = samples.len();
    let d = samples.dim();
    let mut total = CoefficientSums::new(freqs);
    par::ordered_fold(
        par::nblocks(n),
        |b| {
            let rg = par::block_range(b, n);
            let mut acc = CoefficientSums::new(freqs);
            acc.add_points(&samples.as_flat()[rg.start * d..rg.end * d]);
            Ok(acc)
        },
        |_, acc| {
            total.merge(&acc);
            Ok(())
        },
    )?;
    total.finish(false)
}

/// A truncated Fourier series on [−1,1]^d, optionally clipped at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierHypothesis {
    freqs: FrequencySet,
    coeffs: Vec<C64>,
    pub clip: bool,
    hermitian: bool,
}

impl FourierHypothesis {
    pub fn new(freqs: FrequencySet, coeffs: Vec<C64>, clip: bool) -> Result<Self> {
        if coeffs.len() != freqs.len() {
            return Err(Error::Parameter(format!(
                "{} coefficients for a lattice of {} frequencies",
                coeffs.len(),
                freqs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Parameter("non-finite Fourier coefficient".into()));
        }
        let hermitian = (0..coeffs.len()).all(|i| coeffs[i] == coeffs[freqs.mirror(i)].conj());
        Ok(FourierHypothesis {
            freqs,
            coeffs,
            clip,
            hermitian,
        })
    }

    pub fn freqs(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn dim(&self) -> usize {
        self.freqs.dim()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, xi: &[i64]) -> Option<C64> {
        self.freqs.index_of(xi).map(|i| self.coeffs[i])
    }

    pub fn clipped(mut self, clip: bool) -> Self {
        self.clip = clip;
        self
    }

    /// True when û(−ξ) is exactly the conjugate of û(ξ), so u is real.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// (1/2^d)·Σ|û(ξ)|², which equals ∫u² over [−1,1]^d.
    pub fn parseval_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.volume()
    }

    /// (1/2^d)·Σ|û(ξ)|, a bound on sup |u|.
    pub fn abs_sum_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum::<f64>() / self.volume()
    }

    fn volume(&self) -> f64 {
        2f64.powi(self.dim() as i32)
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        let side = self.freqs.side();
        let d = self.dim();
        Evaluator {
            h: self,
            tables: vec![C64::new(0.0, 0.0); d * side],
            buf_a: Vec::new(),
            buf_b: Vec::new(),
        }
    }

    /// h(z) (or Re u(z) when not clipping), with a domain check.
    pub fn evaluate(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::Domain(format!("point of dimension {} for a {}-dimensional hypothesis", z.len(), self.dim())));
        }
        check_cube(z)?;
        Ok(self.evaluator().value(z))
    }

    /// u(z) as a complex number (no clipping, no domain check).
    pub fn eval_u(&self, z: &[f64]) -> C64 {
        self.evaluator().full_u(z)
    }

    /// Values at many row-major points of [−1,1]^d, computed in parallel.
    pub fn values(&self, pts: &[f64]) -> Vec<f64> {
        let d = self.dim();
        pts.par_chunks(d * 256)
            .flat_map_iter(|chunk| {
                let mut ev = self.evaluator();
                chunk.chunks_exact(d).map(|z| ev.value(z)).collect::<Vec<_>>()
            })
            .collect()
    }

    /// Values on the midpoint grid of [−1,1]^d with `n` cells per axis, row-major
    /// (last axis fastest), computed with one inverse FFT per axis. Needs n ≥ 2T+1.
    pub fn grid_values(&self, n: usize) -> Result<Vec<f64>> {
        let d = self.dim();
        let t = self.freqs.cutoff();
        if n < self.freqs.side() {
            return Err(Error::Parameter(format!("grid of {n} cells cannot resolve cutoff {t}")));
        }
        let total = n
            .checked_pow(d as u32)
            .filter(|&v| v <= 1 << 28)
            .ok_or_else(|| Error::Resource(format!("grid {n}^{d} is too large")))?;
        // midpoint z_m = −1 + (2m+1)/n, so e^{iπξz_m} = e^{iπξ(1/n − 1)}·e^{2πiξm/n}
        let phase: Vec<C64> = (0..self.freqs.side())
            .map(|k| {
                let xi = k as f64 - t as f64;
                C64::from_polar(1.0, PI * xi * (1.0 / n as f64 - 1.0))
            })
            .collect();
        let mut x = vec![C64::new(0.0, 0.0); total];
        let side = self.freqs.side();
        let mut digits = vec![0usize; d];
        for c in &self.coeffs {
            let mut idx = 0usize;
            let mut w = *c;
            for &k in &digits {
                let xi = k as i64 - t as i64;
                idx = idx * n + xi.rem_euclid(n as i64) as usize;
                w *= phase[k];
            }
            x[idx] += w;
            for j in (0..d).rev() {
                digits[j] += 1;
                if digits[j] < side {
                    break;
                }
                digits[j] = 0;
            }
        }
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let mut line = vec![C64::new(0.0, 0.0); n];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                fft.process(&mut x);
                continue;
            }
            let outer = total / (n * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for m in 0..n {
                        line[m] = x[base + m * stride];
                    }
                    fft.process(&mut line);
                    for m in 0..n {
                        x[base + m * stride] = line[m];
                    }
                }
            }
        }
        let vol = self.volume();
        Ok(x
            .into_iter()
            .map(|v| {
                let r = v.re / vol;
                if self.clip {
                    r.max(0.0)
                } else {
                    r
                }
            })
            .collect())
    }

    pub fn to_json(&self, frame: Option<&AffineFrame>) -> Result<String> {
        let file = HypothesisFile {
            version: 1,
            d: self.dim(),
            t: self.freqs.cutoff(),
            clip: self.clip,
            frame: frame.map(|f| FrameFile {
                mu: f17s(&f.mu),
                t: F17(f.t),
            }),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| CoeffFile {
                    xi: self.freqs.xi(i),
                    re: F17(c.re),
                    im: F17(c.im),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<(FourierHypothesis, Option<AffineFrame>)> {
        let file: HypothesisFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(Error::Parameter(format!("unsupported hypothesis version {}", file.version)));
        }
        let freqs = FrequencySet::build(file.d, file.t)?;
        if file.coeffs.len() != freqs.len() {
            return Err(Error::Parameter("coefficient count does not match (2T+1)^d".into()));
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); freqs.len()];
        for (i, c) in file.coeffs.iter().enumerate() {
            if freqs.index_of(&c.xi) != Some(i) {
                return Err(Error::Parameter(format!("coefficient {i} is out of lexicographic order")));
            }
            coeffs[i] = C64::new(c.re.0, c.im.0);
        }
        let frame = match file.frame {
            Some(f) => Some(AffineFrame::new(unwrap17(&f.mu), f.t.0)?),
            None => None,
        };
        Ok((FourierHypothesis::new(freqs, coeffs, file.clip)?, frame))
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffFile {
    xi: Vec<i64>,
    re: F17,
    im: F17,
}

#[derive(Serialize, Deserialize)]
struct FrameFile {
    mu: Vec<F17>,
    t: F17,
}

#[derive(Serialize, Deserialize)]
struct HypothesisFile {
    version: u32,
    d: usize,
    #[serde(rename = "T")]
    t: usize,
    clip: bool,
    frame: Option<FrameFile>,
    coeffs: Vec<CoeffFile>,
}

/// Reusable scratch space for evaluating one hypothesis at many points.
pub struct Evaluator<'a> {
    h: &'a FourierHypothesis,
    tables: Vec<C64>,
    buf_a: Vec<C64>,
    buf_b: Vec<C64>,
}

impl Evaluator<'_> {
    fn fill_tables(&mut self, z: &[f64]) {
        let side = self.h.freqs.side();
        let t = self.h.freqs.cutoff();
        for (j, &zj) in z.iter().enumerate() {
            cis_table(PI * zj, t, &mut self.tables[j * side..(j + 1) * side]);
        }
    }

    /// Contracts axes 2..d of `rows` consecutive rows starting at `start`;
    /// leaves one value per row in `buf_a`.
    fn contract_rest(&mut self, start: usize, rows: usize) {
        let f = self.h.freqs;
        let side = f.side();
        let d = f.dim();
        let r = f.row_len();
        self.buf_a.clear();
        self.buf_a.extend_from_slice(&self.h.coeffs[start..start + rows * r]);
        for axis in (1..d).rev() {
            let tab = &self.tables[axis * side..(axis + 1) * side];
            self.buf_b.clear();
            for group in self.buf_a.chunks_exact(side) {
                let mut acc = C64::new(0.0, 0.0);
                for (c, e) in group.iter().zip(tab) {
                    acc += c * e;
                }
                self.buf_b.push(acc);
            }
            std::mem::swap(&mut self.buf_a, &mut self.buf_b);
        }
    }

    /// u(z) from the full lattice.
    pub fn full_u(&mut self, z: &[f64]) -> C64 {
        self.fill_tables(z);
        let side = self.h.freqs.side();
        self.contract_rest(0, side);
        let tab = &self.tables[..side];
        let s: C64 = self.buf_a.iter().zip(tab).map(|(a, e)| a * e).sum();
        s / self.h.volume()
    }

    /// Re u(z), using conjugate symmetry when the coefficients have it.
    pub fn real_u(&mut self, z: &[f64]) -> f64 {
        if !self.h.hermitian {
            return self.full_u(z).re;
        }
        self.fill_tables(z);
        let t = self.h.freqs.cutoff();
        self.contract_rest(self.h.freqs.half_start(), t + 1);
        let tab = &self.tables[t..2 * t + 1];
        let mut s = self.buf_a[0].re;
        for k in 1..=t {
            let p = self.buf_a[k] * tab[k];
            s += 2.0 * p.re;
        }
        s / self.h.volume()
    }

    /// h(z): Re u(z), clipped at zero when the hypothesis clips.
    pub fn value(&mut self, z: &[f64]) -> f64 {
        let v = self.real_u(z);
        if self.h.clip {
            v.max(0.0)
        } else {
            v
        }
    }
}
