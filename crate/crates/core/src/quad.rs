//! Adaptive Gauss–Kronrod quadrature and tensor midpoint grids.

use crate::error::{Error, Result};

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Subinterval budget of the global adaptive scheme.
const MAX_INTERVALS: usize = 4000;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err.total_cmp(&o.err).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// ∫_a^b f with absolute tolerance `abs_tol` and relative tolerance `rel_tol`,
/// always bisecting the piece with the largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (val, err) = gk15(&f, a, b);
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Piece { a, b, val, err });
    let (mut total, mut total_err) = (val, err);
    // pieces too narrow to split further
    let (mut frozen_val, mut frozen_err) = (0.0, 0.0);
    let min_width = (b - a).abs() * 1e-13;
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_INTERVALS {
        let Some(p) = heap.pop() else { break };
        if (p.b - p.a).abs() < min_width {
            frozen_val += p.val;
            frozen_err += p.err;
            continue;
        }
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
    }
    // re-sum to shed the running-update rounding
    let total: f64 = frozen_val + heap.iter().map(|p| p.val).sum::<f64>();
    let total_err: f64 = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
    if !total.is_finite() {
        return Err(Error::Quadrature(format!("non-finite result on [{a}, {b}]")));
    }
    let tol = abs_tol.max(rel_tol * total.abs());
    if total_err > 1e3 * tol.max(1e-14 * total.abs()) {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}]: error estimate {total_err:e} against tolerance {tol:e}"
        )));
    }
    Ok(total)
}

/// ∫_a^b f split at the given interior breakpoints (kinks or jumps of f).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<f64> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(|x, y| x.total_cmp(y));
    pts.insert(0, a);
    pts.push(b);
    let share = abs_tol / (pts.len() - 1) as f64;
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += integrate(&f, w[0], w[1], share, 1e-13)?;
    }
    Ok(total)
}

/// ∫_0^∞ f(z) dz for nonnegative, eventually decreasing f, summed over dyadic
/// blocks [2^k, 2^{k+1}]. Fails when the blocks stop shrinking, which is the
/// signature of a tail decaying like 1/z or slower.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> Result<f64> {
    let mut total = integrate(&f, 0.0, 1.0, 1e-12, rel_tol * 0.1)?;
    let mut lo = 1.0_f64;
    let mut small_run = 0;
    for _ in 0..200 {
        let hi = 2.0 * lo;
        let piece = integrate(&f, lo, hi, 1e-14, rel_tol * 0.1)?;
        total += piece;
        if piece <= rel_tol * 1e-2 * total.abs() {
            small_run += 1;
            if small_run >= 3 {
                return Ok(total);
            }
        } else {
            small_run = 0;
        }
        lo = hi;
    }
    Err(Error::Quadrature(
        "integral over the half line did not converge (tail decays like 1/z or slower)".into(),
    ))
}

/// Midpoints of a uniform partition of [lo, hi] into `n` cells.
pub fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

/// Tensor midpoint rule over a box, visiting every cell center.
///
/// `f` receives the cell center; the returned value is Σ f · cell volume.
pub fn tensor_midpoint<F: FnMut(&[f64]) -> f64>(lo: &[f64], hi: &[f64], n: usize, mut f: F) -> f64 {
    let d = lo.len();
    let axes: Vec<Vec<f64>> = (0..d).map(|j| midpoints(lo[j], hi[j], n)).collect();
    let vol: f64 = (0..d).map(|j| (hi[j] - lo[j]) / n as f64).product();
    let mut idx = vec![0usize; d];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut sum = 0.0;
    loop {
        sum += f(&x);
        let mut j = d;
        loop {
            if j == 0 {
                return sum * vol;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < n {
                x[j] = axes[j][idx[j]];
                break;
            }
            idx[j] = 0;
            x[j] = axes[j][0];
        }
    }
}
