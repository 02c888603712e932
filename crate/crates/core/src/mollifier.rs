//! The smooth bump b(x) = c₀·exp(−x²/(1−x²)) on (−1, 1), its scaled product
//! b_{d,γ}(x) = γ^{−d}·∏ b(x_j/γ), exact samplers and Fourier-magnitude bounds.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quad;

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let x2 = x * x;
        (-x2 / (1.0 - x2)).exp()
    }
}

/// Normalizing constant c₀ ≈ 0.8286, computed once by quadrature.
pub fn c0() -> f64 {
    static C0: OnceLock<f64> = OnceLock::new();
    *C0.get_or_init(|| {
        let z = quad::integrate(bump, -1.0, 1.0, 1e-15, 1e-14).expect("bump integral is finite");
        1.0 / z
    })
}

/// b(x).
pub fn eval_b(x: f64) -> f64 {
    c0() * bump(x)
}

/// ∫x²b(x)dx.
pub fn variance_b() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| {
        quad::integrate(|x| x * x * eval_b(x), -1.0, 1.0, 1e-15, 1e-13).expect("finite")
    })
}

/// ∫_{−1}^x b.
pub fn cdf_b(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        quad::integrate(eval_b, -1.0, x, 1e-14, 1e-12).expect("finite").clamp(0.0, 1.0)
    }
}

/// One exact draw from b, by rejection against [−1,1]×[0,c₀].
pub fn sample_b<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random_range(-1.0..1.0);
        // v ≤ b(u) ⇔ v/c₀ ≤ bump(u)
        let v: f64 = rng.random();
        if v < bump(u) {
            return u;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierParams {
    pub d: usize,
    pub gamma: f64,
}

impl MollifierParams {
    pub fn new(d: usize, gamma: f64) -> Result<Self> {
        if d == 0 || !(gamma > 0.0 && gamma <= 0.5) {
            return Err(Error::Parameter(format!(
                "mollifier needs d >= 1 and 0 < gamma <= 1/2, got d={d}, gamma={gamma}"
            )));
        }
        Ok(MollifierParams { d, gamma })
    }

    /// b_{d,γ}(x).
    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| eval_b(v / self.gamma) / self.gamma).product()
    }

    /// sup b_{d,γ} = (c₀/γ)^d.
    pub fn sup(&self) -> f64 {
        (c0() / self.gamma).powi(self.d as i32)
    }

    /// Writes a draw of b_{d,γ} into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d);
        for v in out.iter_mut() {
            *v = self.gamma * sample_b(rng);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.sample_into(rng, &mut out);
        out
    }
}

/// e^{−√(γ‖ξ‖∞)}·(γ‖ξ‖∞)^{−3/4}, a bound on |b̂_{d,γ}(ξ)|.
pub fn fourier_bound(xi: &[i64], gamma: f64) -> Result<f64> {
    let m = xi.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
    if m == 0 {
        return Err(Error::Domain("the Fourier bound is undefined at the zero frequency".into()));
    }
    let s = gamma * m as f64;
    Ok((-s.sqrt()).exp() * s.powf(-0.75))
}

/// ∫_{−1}^1 b(x)·e^{−iπξx} dx by adaptive quadrature.
pub fn fourier_b_numeric(xi: f64) -> Complex64 {
    // split into pieces no longer than a quarter period
    let pieces = ((4.0 * xi.abs()).ceil() as usize).max(8);
    let breaks: Vec<f64> = (1..pieces)
        .map(|k| -1.0 + 2.0 * k as f64 / pieces as f64)
        .collect();
    let re = quad::integrate_with_breaks(|x| eval_b(x) * (PI * xi * x).cos(), -1.0, 1.0, &breaks, 1e-13)
        .expect("finite");
    let im = quad::integrate_with_breaks(|x| -eval_b(x) * (PI * xi * x).sin(), -1.0, 1.0, &breaks, 1e-13)
        .expect("finite");
    Complex64::new(re, im)
}

/// b̂_{d,γ}(ξ) = ∏ b̂(γξ_j).
pub fn fourier_b_dgamma_numeric(xi: &[i64], gamma: f64) -> Complex64 {
    xi.iter()
        .map(|&k| fourier_b_numeric(gamma * k as f64))
        .fold(Complex64::new(1.0, 0.0), |a, b| a * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn normalization_and_values() {
        // 1/∫e^{-x²/(1-x²)} from an independent quadrature
        assert!((c0() - 0.828_568_839_869_106_5).abs() < 1e-9, "{}", c0());
        let total = quad::integrate(eval_b, -1.0, 1.0, 1e-15, 1e-13).unwrap();
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(eval_b(1.0), 0.0);
        assert_eq!(eval_b(-3.0), 0.0);
        assert!((eval_b(0.5) - c0() * (-1.0f64 / 3.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn sup_of_scaled_product() {
        let p = MollifierParams::new(2, 0.1).unwrap();
        assert!((p.eval(&[0.0, 0.0]) - p.sup()).abs() < 1e-9 * p.sup());
        assert!(p.eval(&[0.05, 0.0]) < p.sup());
    }

    #[test]
    fn fourier_bound_values() {
        assert!((fourier_bound(&[16], 1.0).unwrap() - 0.002290).abs() < 1e-6);
        assert!((fourier_bound(&[8, 0], 0.5).unwrap() - 0.04785).abs() < 1e-5);
        assert!(fourier_bound(&[0, 0], 0.5).is_err());
    }

    #[test]
    fn transform_at_zero_and_symmetry() {
        let z = fourier_b_numeric(0.0);
        assert!((z.re - 1.0).abs() < 1e-10 && z.im.abs() < 1e-12);
        let a = fourier_b_numeric(1.7);
        let b = fourier_b_numeric(-1.7);
        assert!((a - b.conj()).norm() < 1e-12);
        assert!(fourier_b_numeric(4.0).norm() <= fourier_bound(&[4], 1.0).unwrap());
    }

    #[test]
    fn transform_matches_reference_values() {
        // frozen from an independent adaptive quadrature
        assert!((fourier_b_numeric(1.0).re - 0.406_548_218_726_184_3).abs() < 1e-9);
        assert!((fourier_b_numeric(2.0).re + 0.096_527_332_870_193_58).abs() < 1e-9);
        assert!((fourier_b_numeric(16.0).re + 9.735_700_340_365_275e-5).abs() < 1e-10);
    }

    #[test]
    fn decay_bound_from_two_to_sixty_four() {
        for k in 2..=64i64 {
            let v = fourier_b_numeric(k as f64).norm();
            assert!(v <= fourier_bound(&[k], 1.0).unwrap(), "xi={k}: {v}");
        }
    }

    #[test]
    fn sampler_moments() {
        let mut rng = Stream::new(11).rng();
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_b(&mut rng);
            assert!(x.abs() < 1.0);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.004);
        assert!((var / variance_b() - 1.0).abs() < 0.02);
    }
}
