//! Ground-truth distributions, Huber contamination, and numerical
//! shift-invariance and total-variation oracles.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::function::erf::erfc;

use crate::domain::{max_norm, norm, ClassParams, TailBound};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::quad;
use crate::rng::{Stream, StreamRng};
use crate::transform::PulledBack;

/// A distribution family with sampler, density and moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum Law {
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    UniformBall { center: Vec<f64>, radius: f64 },
    /// Independent coordinates N(mean_j, sd_j²).
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
    /// N(0, sd²) conditioned on [lo, hi].
    TruncatedGaussian { sd: f64, lo: f64, hi: f64 },
    Laplace { loc: f64, scale: f64 },
    /// Independent Exp(rate) − 1/rate coordinates (zero mean).
    ShiftedExponential { rate: f64, dim: usize },
    /// Exp(rate) conditioned on [0, upper], shifted to zero mean.
    TruncatedExponential { rate: f64, upper: f64 },
    Mixture { parts: Vec<(f64, GroundTruth)> },
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn unit_ball_volume(d: usize) -> f64 {
    let d = d as f64;
    PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0 + 1.0)
}

impl Law {
    pub fn dim(&self) -> usize {
        match self {
            Law::UniformBox { lo, .. } => lo.len(),
            Law::UniformBall { center, .. } => center.len(),
            Law::Gaussian { mean, .. } => mean.len(),
            Law::TruncatedGaussian { .. } | Law::Laplace { .. } | Law::TruncatedExponential { .. } => 1,
            Law::ShiftedExponential { dim, .. } => *dim,
            Law::Mixture { parts } => parts.first().map_or(0, |p| p.1.dim()),
        }
    }

    fn trunc_exp_mean(rate: f64, upper: f64) -> f64 {
        let e = (-rate * upper).exp();
        (1.0 - e * (1.0 + rate * upper)) / (rate * (1.0 - e))
    }

    fn trunc_gauss_norm(sd: f64, lo: f64, hi: f64) -> f64 {
        std_normal_cdf(hi / sd) - std_normal_cdf(lo / sd)
    }

    pub fn sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            Law::UniformBox { lo, hi } => {
                for j in 0..out.len() {
                    out[j] = rng.random_range(lo[j]..hi[j]);
                }
            }
            Law::UniformBall { center, radius } => {
                let d = out.len();
                if d == 1 {
                    out[0] = center[0] + rng.random_range(-radius..*radius);
                    return;
                }
                loop {
                    for v in out.iter_mut() {
                        *v = StandardNormal.sample(rng);
                    }
                    let n = norm(out);
                    if n > 0.0 {
                        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                        for (v, c) in out.iter_mut().zip(center) {
                            *v = c + *v * r / n;
                        }
                        return;
                    }
                }
            }
            Law::Gaussian { mean, sd } => {
                for j in 0..out.len() {
                    let z: f64 = StandardNormal.sample(rng);
                    out[j] = mean[j] + sd[j] * z;
                }
            }
            Law::TruncatedGaussian { sd, lo, hi } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let x = sd * z;
                if x >= *lo && x <= *hi {
                    out[0] = x;
                    return;
                }
            },
            Law::Laplace { loc, scale } => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                out[0] = loc + scale * (a - b);
            }
            Law::ShiftedExponential { rate, .. } => {
                for v in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *v = (e - 1.0) / rate;
                }
            }
            Law::TruncatedExponential { rate, upper } => {
                let u: f64 = rng.random();
                let x = -(1.0 - u * (1.0 - (-rate * upper).exp())).ln() / rate;
                out[0] = x.min(*upper) - Self::trunc_exp_mean(*rate, *upper);
            }
            Law::Mixture { parts } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, g) in parts {
                    acc += w;
                    if u < acc {
                        return g.law.sample(rng, out);
                    }
                }
                parts.last().expect("nonempty mixture").1.law.sample(rng, out)
            }
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match self {
            Law::UniformBox { lo, hi } => {
                let mut v = 1.0;
                for j in 0..x.len() {
                    if x[j] < lo[j] || x[j] > hi[j] {
                        return 0.0;
                    }
                    v /= hi[j] - lo[j];
                }
                v
            }
            Law::UniformBall { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                if r2 <= radius * radius {
                    let d = x.len();
                    let vol = if d == 2 { PI } else { unit_ball_volume(d) };
                    1.0 / (vol * radius.powi(d as i32))
                } else {
                    0.0
                }
            }
            Law::Gaussian { mean, sd } => x
                .iter()
                .zip(mean)
                .zip(sd)
                .map(|((xv, m), s)| std_normal_pdf((xv - m) / s) / s)
                .product(),
            Law::TruncatedGaussian { sd, lo, hi } => {
                if x[0] < *lo || x[0] > *hi {
                    0.0
                } else {
                    std_normal_pdf(x[0] / sd) / sd / Self::trunc_gauss_norm(*sd, *lo, *hi)
                }
            }
            Law::Laplace { loc, scale } => (-(x[0] - loc).abs() / scale).exp() / (2.0 * scale),
            Law::ShiftedExponential { rate, .. } => x
                .iter()
                .map(|&v| {
                    let e = v + 1.0 / rate;
                    if e < 0.0 {
                        0.0
                    } else {
                        rate * (-rate * e).exp()
                    }
                })
                .product(),
            Law::TruncatedExponential { rate, upper } => {
                let e = x[0] + Self::trunc_exp_mean(*rate, *upper);
                if e < 0.0 || e > *upper {
                    0.0
                } else {
                    rate * (-rate * e).exp() / (1.0 - (-rate * upper).exp())
                }
            }
            Law::Mixture { parts } => parts.iter().map(|(w, g)| w * g.law.pdf(x)).sum(),
        }
    }

    /// CDF for one-dimensional laws.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Unsupported("CDF is only available in one dimension".into()));
        }
        Ok(match self {
            Law::UniformBox { lo, hi } => ((x - lo[0]) / (hi[0] - lo[0])).clamp(0.0, 1.0),
            Law::UniformBall { center, radius } => ((x - center[0] + radius) / (2.0 * radius)).clamp(0.0, 1.0),
            Law::Gaussian { mean, sd } => std_normal_cdf((x - mean[0]) / sd[0]),
            Law::TruncatedGaussian { sd, lo, hi } => {
                let xc = x.clamp(*lo, *hi);
                (std_normal_cdf(xc / sd) - std_normal_cdf(lo / sd)) / Self::trunc_gauss_norm(*sd, *lo, *hi)
            }
            Law::Laplace { loc, scale } => {
                let z = (x - loc) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Law::ShiftedExponential { rate, .. } => {
                let e = x + 1.0 / rate;
                if e <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * e).exp()
                }
            }
            Law::TruncatedExponential { rate, upper } => {
                let e = (x + Self::trunc_exp_mean(*rate, *upper)).clamp(0.0, *upper);
                (1.0 - (-rate * e).exp()) / (1.0 - (-rate * upper).exp())
            }
            Law::Mixture { parts } => {
                let mut s = 0.0;
                for (w, g) in parts {
                    s += w * g.law.cdf(x)?;
                }
                s
            }
        })
    }

    /// Jump and kink locations along axis j = `fixed.len()` on the line whose
    /// first j coordinates are `fixed`.
    pub fn section_breaks(&self, fixed: &[f64]) -> Vec<f64> {
        let j = fixed.len();
        match self {
            Law::UniformBox { lo, hi } => vec![lo[j], hi[j]],
            Law::UniformBall { center, radius } => {
                let rem = radius * radius - fixed.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>();
                let mut out = vec![center[j] - radius, center[j] + radius];
                if rem > 0.0 {
                    out.extend([center[j] - rem.sqrt(), center[j] + rem.sqrt()]);
                }
                out
            }
            Law::TruncatedGaussian { lo, hi, .. } => vec![*lo, *hi],
            Law::Laplace { loc, .. } => vec![*loc],
            Law::ShiftedExponential { rate, .. } => vec![-1.0 / rate],
            Law::TruncatedExponential { rate, upper } => {
                let m = Self::trunc_exp_mean(*rate, *upper);
                vec![-m, upper - m]
            }
            Law::Gaussian { .. } => Vec::new(),
            Law::Mixture { parts } => parts.iter().flat_map(|p| p.1.law.section_breaks(fixed)).collect(),
        }
    }

    /// Jumps and kinks of a one-dimensional density.
    pub fn breaks(&self) -> Vec<f64> {
        self.section_breaks(&[])
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Law::UniformBox { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Law::UniformBall { center, .. } => center.clone(),
            Law::Gaussian { mean, .. } => mean.clone(),
            Law::TruncatedGaussian { sd, lo, hi } => {
                let z = Self::trunc_gauss_norm(*sd, *lo, *hi);
                vec![sd * (std_normal_pdf(lo / sd) - std_normal_pdf(hi / sd)) / z]
            }
            Law::Laplace { loc, .. } => vec![*loc],
            Law::ShiftedExponential { dim, .. } => vec![0.0; *dim],
            Law::TruncatedExponential { .. } => vec![0.0],
            Law::Mixture { parts } => {
                let mut m = vec![0.0; self.dim()];
                for (w, g) in parts {
                    for (a, b) in m.iter_mut().zip(g.law.mean()) {
                        *a += w * b;
                    }
                }
                m
            }
        }
    }

    /// Covariance matrix, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let diag = |v: Vec<f64>| {
            let mut c = vec![0.0; d * d];
            for (j, x) in v.into_iter().enumerate() {
                c[j * d + j] = x;
            }
            c
        };
        match self {
            Law::UniformBox { lo, hi } => diag(lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a) / 12.0).collect()),
            Law::UniformBall { radius, .. } => diag(vec![radius * radius / (d as f64 + 2.0); d]),
            Law::Gaussian { sd, .. } => diag(sd.iter().map(|s| s * s).collect()),
            Law::TruncatedGaussian { sd, lo, hi } => {
                let (a, b) = (lo / sd, hi / sd);
                let z = Self::trunc_gauss_norm(*sd, *lo, *hi);
                let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
                let m = (pa - pb) / z;
                diag(vec![sd * sd * (1.0 + (a * pa - b * pb) / z - m * m)])
            }
            Law::Laplace { scale, .. } => diag(vec![2.0 * scale * scale]),
            Law::ShiftedExponential { rate, .. } => diag(vec![1.0 / (rate * rate); d]),
            Law::TruncatedExponential { rate, upper } => {
                let (l, a) = (*rate, *upper);
                let e = (-l * a).exp();
                let m2 = (2.0 - e * (l * l * a * a + 2.0 * l * a + 2.0)) / (l * l * (1.0 - e));
                let m = Self::trunc_exp_mean(l, a);
                diag(vec![m2 - m * m])
            }
            Law::Mixture { parts } => {
                let mu = self.mean();
                let mut c = vec![0.0; d * d];
                for (w, g) in parts {
                    let gm = g.law.mean();
                    let gc = g.law.covariance();
                    for i in 0..d {
                        for j in 0..d {
                            c[i * d + j] += w * (gc[i * d + j] + (gm[i] - mu[i]) * (gm[j] - mu[j]));
                        }
                    }
                }
                c
            }
        }
    }

    /// A box holding all but a negligible part of the mass.
    pub fn support_box(&self) -> Bounds {
        let d = self.dim();
        match self {
            Law::UniformBox { lo, hi } => Bounds::new(lo.clone(), hi.clone()),
            Law::UniformBall { center, radius } => Bounds::new(
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Law::Gaussian { mean, sd } => Bounds::new(
                mean.iter().zip(sd).map(|(m, s)| m - 12.0 * s).collect(),
                mean.iter().zip(sd).map(|(m, s)| m + 12.0 * s).collect(),
            ),
            Law::TruncatedGaussian { lo, hi, .. } => Bounds::new(vec![*lo], vec![*hi]),
            Law::Laplace { loc, scale } => Bounds::new(vec![loc - 40.0 * scale], vec![loc + 40.0 * scale]),
            Law::ShiftedExponential { rate, .. } => Bounds::new(vec![-1.0 / rate; d], vec![40.0 / rate; d]),
            Law::TruncatedExponential { rate, upper } => {
                let m = Self::trunc_exp_mean(*rate, *upper);
                Bounds::new(vec![-m], vec![upper - m])
            }
            Law::Mixture { parts } => {
                let mut b = parts[0].1.law.support_box();
                for (_, g) in &parts[1..] {
                    b = b.union(&g.law.support_box());
                }
                b
            }
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Bounds { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn pad(&self, r: f64) -> Bounds {
        Bounds::new(self.lo.iter().map(|v| v - r).collect(), self.hi.iter().map(|v| v + r).collect())
    }

    pub fn union(&self, o: &Bounds) -> Bounds {
        Bounds::new(
            self.lo.iter().zip(&o.lo).map(|(a, b)| a.min(*b)).collect(),
            self.hi.iter().zip(&o.hi).map(|(a, b)| a.max(*b)).collect(),
        )
    }
}

/// A named ground-truth density with its declared class membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub name: String,
    pub law: Law,
    /// Declared (c, tail); `None` for laws outside any tail-bounded class of interest.
    pub class: Option<ClassParams>,
}

impl GroundTruth {
    pub fn new(name: impl Into<String>, law: Law, class: Option<ClassParams>) -> Self {
        GroundTruth {
            name: name.into(),
            law,
            class,
        }
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.law.pdf(x)
    }

    pub fn mean(&self) -> Vec<f64> {
        self.law.mean()
    }

    pub fn covariance(&self) -> Vec<f64> {
        self.law.covariance()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.law.sample(rng, &mut out);
        out
    }

    pub fn with_class(mut self, c: f64, tail: TailBound) -> Self {
        self.class = Some(ClassParams {
            c,
            d: self.dim(),
            tail,
        });
        self
    }

    /// Parses a registry entry: `{"name": ..., "d": ..., params...}` or a full
    /// serialized `GroundTruth` (an object with a `law` field).
    pub fn from_spec(v: &Value) -> Result<Self> {
        if v.get("law").is_some() {
            return Ok(serde_json::from_value(v.clone())?);
        }
        let name = v
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parameter("distribution spec needs a name".into()))?;
        let d = v.get("d").and_then(Value::as_u64).unwrap_or(1) as usize;
        registry(name, d, v)
    }
}

impl Oracle for GroundTruth {
    fn dim(&self) -> usize {
        self.law.dim()
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        self.law.sample(rng, out);
        Ok(1)
    }
}

/// f' = (1−ε)·f + ε·f_noise.
pub fn contaminate(f: &GroundTruth, noise: &GroundTruth, eps: f64) -> Result<GroundTruth> {
    if f.dim() != noise.dim() {
        return Err(Error::Domain(format!(
            "cannot mix a {}-dimensional law with a {}-dimensional one",
            f.dim(),
            noise.dim()
        )));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Parameter(format!("contamination level must lie in [0, 1], got {eps}")));
    }
    if eps == 0.0 {
        return Ok(f.clone());
    }
    if eps == 1.0 {
        return Ok(noise.clone());
    }
    Ok(GroundTruth {
        name: format!("{}+{}*{}", f.name, eps, noise.name),
        law: Law::Mixture {
            parts: vec![(1.0 - eps, f.clone()), (eps, noise.clone())],
        },
        class: None,
    })
}

fn param(v: &Value, key: &str, default: f64) -> Result<f64> {
    match v.get(key) {
        None => Ok(default),
        Some(x) => x
            .as_f64()
            .ok_or_else(|| Error::Parameter(format!("parameter {key} must be a number"))),
    }
}

fn need_dim(name: &str, d: usize, want: usize) -> Result<()> {
    if d != want {
        return Err(Error::Parameter(format!("{name} is only defined for d = {want}")));
    }
    Ok(())
}

/// Looks up a named family, with parameters taken from `params` where given.
///
/// Names: `uniform-ball` (radius), `uniform-box` (half_width), `uniform-interval`
/// (lo, hi), `gaussian` (sigma), `anisotropic-gaussian`, `laplace` (loc, scale),
/// `shifted-exponential` (rate), `truncated-exponential` (rate, upper),
/// `truncated-gaussian` (sigma, half_width).
pub fn registry(name: &str, d: usize, params: &Value) -> Result<GroundTruth> {
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    let df = d as f64;
    let g = match name {
        "uniform-ball" => {
            let r = param(params, "radius", 0.5)?;
            // SI is at most 2·vol_{d-1}(r)/vol_d(r)
            let c = if d == 1 {
                1.0 / r
            } else {
                2.0 * unit_ball_volume(d - 1) / (unit_ball_volume(d) * r)
            };
            GroundTruth::new(
                name,
                Law::UniformBall {
                    center: vec![0.0; d],
                    radius: r,
                },
                None,
            )
            .with_class(c * 1.02, TailBound::bounded(r))
        }
        "uniform-box" => {
            let h = param(params, "half_width", 0.5)?;
            GroundTruth::new(
                name,
                Law::UniformBox {
                    lo: vec![-h; d],
                    hi: vec![h; d],
                },
                None,
            )
            .with_class(df.sqrt() / h, TailBound::bounded(h * df.sqrt()))
        }
        "uniform-interval" => {
            need_dim(name, d, 1)?;
            let lo = param(params, "lo", -0.5)?;
            let hi = param(params, "hi", 0.5)?;
            if !(hi > lo) {
                return Err(Error::Parameter("uniform-interval needs lo < hi".into()));
            }
            GroundTruth::new(
                name,
                Law::UniformBox {
                    lo: vec![lo],
                    hi: vec![hi],
                },
                None,
            )
            .with_class(2.0 / (hi - lo), TailBound::bounded(0.5 * (hi - lo)))
        }
        "gaussian" => {
            let s = param(params, "sigma", 1.0)?;
            let beta = if d <= 2 { s * 2f64.sqrt() } else { s * (2.0 * df).sqrt() };
            GroundTruth::new(
                name,
                Law::Gaussian {
                    mean: vec![0.0; d],
                    sd: vec![s; d],
                },
                None,
            )
            .with_class(1.0 / s, TailBound::gaussian(beta))
        }
        "anisotropic-gaussian" => {
            need_dim(name, d, 2)?;
            GroundTruth::new(
                name,
                Law::Gaussian {
                    mean: vec![0.0; 2],
                    sd: vec![2.0, 1.0],
                },
                None,
            )
            .with_class(1.0, TailBound::gaussian(2.0 * 2f64.sqrt()))
        }
        "laplace" => {
            need_dim(name, d, 1)?;
            let b = param(params, "scale", 1.0)?;
            let loc = param(params, "loc", 0.0)?;
            GroundTruth::new(name, Law::Laplace { loc, scale: b }, None)
                .with_class(1.0 / b, TailBound::exponential(b))
        }
        "shifted-exponential" => {
            let r = param(params, "rate", 1.0)?;
            GroundTruth::new(name, Law::ShiftedExponential { rate: r, dim: d }, None)
                .with_class(2.0 * r * df.sqrt(), TailBound::exponential(df / r))
        }
        "truncated-exponential" => {
            need_dim(name, d, 1)?;
            let r = param(params, "rate", 1.0)?;
            let a = param(params, "upper", 8.0)?;
            GroundTruth::new(name, Law::TruncatedExponential { rate: r, upper: a }, None)
                .with_class(2.0 * r / (1.0 - (-r * a).exp()) * 1.005, TailBound::exponential(1.0 / r))
        }
        "truncated-gaussian" => {
            need_dim(name, d, 1)?;
            let s = param(params, "sigma", 0.1)?;
            let h = param(params, "half_width", 0.5)?;
            let z = Law::trunc_gauss_norm(s, -h, h);
            // total variation of the density bounds SI
            let c = 2.0 * std_normal_pdf(0.0) / (s * z);
            GroundTruth::new(name, Law::TruncatedGaussian { sd: s, lo: -h, hi: h }, None)
                .with_class(c.max(1.0 / s), TailBound::bounded(h))
        }
        other => return Err(Error::Parameter(format!("unknown distribution name {other:?}"))),
    };
    Ok(g)
}

/// The fixed test corpus.
pub fn zoo() -> Vec<GroundTruth> {
    let none = Value::Null;
    let mut out = vec![
        registry("uniform-interval", 1, &none).unwrap(),
        registry("uniform-ball", 2, &none).unwrap(),
        registry("gaussian", 1, &serde_json::json!({"sigma": 0.1})).unwrap(),
        registry("gaussian", 1, &none).unwrap(),
        registry("gaussian", 2, &none).unwrap(),
        registry("gaussian", 2, &serde_json::json!({"sigma": 0.1})).unwrap(),
        registry("anisotropic-gaussian", 2, &none).unwrap(),
        registry("laplace", 1, &none).unwrap(),
        registry("shifted-exponential", 1, &none).unwrap(),
        registry("shifted-exponential", 2, &none).unwrap(),
        registry("truncated-exponential", 1, &none).unwrap(),
        registry("truncated-gaussian", 1, &none).unwrap(),
    ];
    for g in &mut out {
        if g.name == "gaussian" {
            let s = match &g.law {
                Law::Gaussian { sd, .. } => sd[0],
                _ => unreachable!(),
            };
            g.name = format!("gaussian-{s}-{}d", g.dim());
        }
    }
    out
}

/// A density evaluable pointwise.
pub trait DensityFn: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    /// Total mass when known (1 for probability densities); drives the coverage check.
    fn total_mass(&self) -> Option<f64> {
        None
    }
    /// Jumps along axis `fixed.len()` with the leading coordinates fixed; used to split quadratures.
    fn breaks(&self, _fixed: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

impl DensityFn for GroundTruth {
    fn dim(&self) -> usize {
        self.law.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.law.pdf(x)
    }
    fn total_mass(&self) -> Option<f64> {
        Some(1.0)
    }
    fn breaks(&self, fixed: &[f64]) -> Vec<f64> {
        self.law.section_breaks(fixed)
    }
}

impl DensityFn for PulledBack {
    fn dim(&self) -> usize {
        PulledBack::dim(self)
    }
    fn eval(&self, x: &[f64]) -> f64 {
        PulledBack::eval(self, x)
    }
}

/// Closure-backed density.
pub struct FnDensity<F> {
    pub dim: usize,
    pub f: F,
    pub mass: Option<f64>,
    /// Jump locations, the same along every axis.
    pub jumps: Vec<f64>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> DensityFn for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn total_mass(&self) -> Option<f64> {
        self.mass
    }
    fn breaks(&self, _fixed: &[f64]) -> Vec<f64> {
        self.jumps.clone()
    }
}

/// Grid resolution per axis used when none is given.
pub fn default_grid(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 1024,
        _ => 128,
    }
}

/// Σ_cells f(center) · cell volume over a tensor midpoint grid, in parallel with ordered reduction.
fn grid_sum<F: Fn(&[f64]) -> [f64; 3] + Sync>(bx: &Bounds, n: usize, f: F) -> [f64; 3] {
    let d = bx.dim();
    let axes: Vec<Vec<f64>> = (0..d).map(|j| quad::midpoints(bx.lo[j], bx.hi[j], n)).collect();
    let cell: f64 = (0..d).map(|j| (bx.hi[j] - bx.lo[j]) / n as f64).product();
    let rows = n.pow(d.saturating_sub(1) as u32);
    let parts: Vec<[f64; 3]> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let mut x = vec![0.0; d];
            let mut rem = r;
            for j in (0..d - 1).rev() {
                x[j] = axes[j][rem % n];
                rem /= n;
            }
            let mut acc = [0.0; 3];
            for &v in &axes[d - 1] {
                x[d - 1] = v;
                let y = f(&x);
                for k in 0..3 {
                    acc[k] += y[k];
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; 3];
    for p in parts {
        for k in 0..3 {
            total[k] += p[k];
        }
    }
    total.map(|v| v * cell)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TvMode {
    /// Tensor midpoint grid with the given cells per axis.
    Grid(usize),
    /// Uniform points over the box.
    MonteCarlo { points: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvEstimate {
    /// ∫|a − b| (un-halved, in [0, 2]).
    pub tv: f64,
    /// Monte-Carlo standard error (0 for grids).
    pub stderr: f64,
    pub mass_a: f64,
    pub mass_b: f64,
}

/// ∫|a − b| over a box.
pub fn estimate_tv(a: &dyn DensityFn, b: &dyn DensityFn, bx: &Bounds, mode: TvMode) -> Result<TvEstimate> {
    let d = bx.dim();
    if a.dim() != d || b.dim() != d {
        return Err(Error::Domain("densities and box disagree on dimension".into()));
    }
    let (est, mass_se) = match mode {
        TvMode::Grid(n) => {
            if d > 3 {
                return Err(Error::Unsupported("grid TV is limited to d <= 3".into()));
            }
            let [tv, ma, mb] = grid_sum(bx, n, |x| {
                let (u, v) = (a.eval(x), b.eval(x));
                [(u - v).abs(), u, v]
            });
            let est = TvEstimate {
                tv,
                stderr: 0.0,
                mass_a: ma,
                mass_b: mb,
            };
            (est, [0.0; 2])
        }
        TvMode::MonteCarlo { points, seed } => {
            let stream = Stream::new(seed);
            let vol = bx.volume();
            let nb = crate::par::nblocks(points);
            // sums of |a-b|, a, b and their squares
            let parts: Vec<[f64; 6]> = (0..nb)
                .into_par_iter()
                .map(|blk| {
                    let mut rng = stream.split(blk as u64).rng();
                    let mut x = vec![0.0; d];
                    let mut acc = [0.0; 6];
                    for _ in crate::par::block_range(blk, points) {
                        for j in 0..d {
                            x[j] = rng.random_range(bx.lo[j]..bx.hi[j]);
                        }
                        let (u, v) = (a.eval(&x), b.eval(&x));
                        for (k, w) in [(u - v).abs(), u, v].into_iter().enumerate() {
                            acc[k] += w;
                            acc[k + 3] += w * w;
                        }
                    }
                    acc
                })
                .collect();
            let mut s = [0.0; 6];
            for p in parts {
                for k in 0..6 {
                    s[k] += p[k];
                }
            }
            let n = points as f64;
            let se = |k: usize| {
                let m = s[k] / n;
                vol * ((s[k + 3] / n - m * m).max(0.0) / n).sqrt()
            };
            let est = TvEstimate {
                tv: vol * s[0] / n,
                stderr: se(0),
                mass_a: vol * s[1] / n,
                mass_b: vol * s[2] / n,
            };
            (est, [se(1), se(2)])
        }
    };
    for ((m, known), se) in [(est.mass_a, a.total_mass()), (est.mass_b, b.total_mass())].into_iter().zip(mass_se) {
        if let Some(k) = known {
            if k - m > 1e-3 + 3.0 * se {
                return Err(Error::Coverage(format!(
                    "the box holds only {m:.6} of a density with mass {k}"
                )));
            }
        }
    }
    Ok(est)
}

/// ∫|h − f| for a pulled-back hypothesis h against a ground truth f over all of R^d.
///
/// The hypothesis lives on the image of [−1,1]^d; there the integral is taken in
/// conditioned coordinates (FFT grid in grid mode, uniform points otherwise), and
/// the mass of f outside that region is added.
pub fn tv_hypothesis_to_truth(h: &PulledBack, truth: &GroundTruth, mode: TvMode) -> Result<TvEstimate> {
    let d = h.dim();
    if truth.dim() != d {
        return Err(Error::Domain("hypothesis and truth disagree on dimension".into()));
    }
    let det = h.map.abs_det();
    match mode {
        TvMode::Grid(n) => {
            let n = n.max(h.inner.freqs().side());
            let g = h.inner.grid_values(n)?;
            let mids = quad::midpoints(-1.0, 1.0, n);
            let cell = (2.0 / n as f64).powi(d as i32);
            let rows = g.len() / n;
            let parts: Vec<[f64; 3]> = (0..rows)
                .into_par_iter()
                .map(|r| {
                    let mut y = vec![0.0; d];
                    let mut x = vec![0.0; d];
                    let mut rem = r;
                    for j in (0..d - 1).rev() {
                        y[j] = mids[rem % n];
                        rem /= n;
                    }
                    let mut acc = [0.0; 3];
                    for (k, &m) in mids.iter().enumerate() {
                        y[d - 1] = m;
                        h.map.to_original(&y, &mut x);
                        let fv = det * truth.pdf(&x);
                        let hv = g[r * n + k];
                        acc[0] += (hv - fv).abs();
                        acc[1] += fv;
                        acc[2] += hv;
                    }
                    acc
                })
                .collect();
            let mut s = [0.0; 3];
            for p in parts {
                for k in 0..3 {
                    s[k] += p[k];
                }
            }
            let inside_f = s[1] * cell;
            Ok(TvEstimate {
                tv: s[0] * cell + (1.0 - inside_f).max(0.0),
                stderr: 0.0,
                mass_a: s[2] * cell,
                mass_b: 1.0,
            })
        }
        TvMode::MonteCarlo { points, seed } => {
            let stream = Stream::new(seed);
            let nb = crate::par::nblocks(points);
            let vol = 2f64.powi(d as i32);
            let parts: Vec<[f64; 4]> = (0..nb)
                .into_par_iter()
                .map(|blk| {
                    let mut rng = stream.split(blk as u64).rng();
                    let mut ev = h.inner.evaluator();
                    let mut y = vec![0.0; d];
                    let mut x = vec![0.0; d];
                    let mut acc = [0.0; 4];
                    for _ in crate::par::block_range(blk, points) {
                        for v in y.iter_mut() {
                            *v = rng.random_range(-1.0..1.0);
                        }
                        h.map.to_original(&y, &mut x);
                        let w = (ev.value(&y) - det * truth.pdf(&x)).abs();
                        acc[0] += w;
                        acc[1] += w * w;
                        // f-mass outside the hypothesis region, from draws of f
                        let z = truth.sample(&mut rng);
                        h.map.to_conditioned(&z, &mut y);
                        if max_norm(&y) > 1.0 {
                            acc[2] += 1.0;
                        }
                        acc[3] += 1.0;
                    }
                    acc
                })
                .collect();
            let mut s = [0.0; 4];
            for p in parts {
                for k in 0..4 {
                    s[k] += p[k];
                }
            }
            let n = s[3];
            let mean = s[0] / n;
            let var = (s[1] / n - mean * mean).max(0.0);
            let out = s[2] / n;
            let se = ((vol * vol * var / n) + out * (1.0 - out) / n).sqrt();
            Ok(TvEstimate {
                tv: vol * mean + out,
                stderr: se,
                mass_a: f64::NAN,
                mass_b: 1.0,
            })
        }
    }
}

/// Shift-invariance SI(f, v, κ): (1/κ)·max over a 32-point grid of κ' ∈ [0, κ]
/// of ∫|f(x + κ'v) − f(x)| dx. Adaptive (nested) quadrature split at the
/// density's breaks for d ≤ 2, a midpoint grid above.
pub fn estimate_si(f: &dyn DensityFn, bx: &Bounds, v: &[f64], kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::Parameter("kappa must be positive".into()));
    }
    let mut best = 0.0_f64;
    for k in 1..32 {
        best = best.max(shift_l1(f, bx, v, kappa * k as f64 / 31.0)?);
    }
    Ok(best / kappa)
}

/// ∫|f(x + s·v) − f(x)| dx over `bx` padded by |s| (quadrature split at the
/// jumps of f and its translate for d ≤ 2, a 64-point grid per axis above).
pub fn shift_l1(f: &dyn DensityFn, bx: &Bounds, v: &[f64], s: f64) -> Result<f64> {
    let d = f.dim();
    if v.len() != d || (norm(v) - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter("direction must be a unit vector of the right dimension".into()));
    }
    let padded = bx.pad(s.abs());
    // breaks of f and of its translate, on the line with leading coordinates `fixed`
    let both = |fixed: &[f64]| {
        let shifted: Vec<f64> = fixed.iter().zip(v).map(|(x, w)| x + s * w).collect();
        let j = fixed.len();
        let mut br = f.breaks(fixed);
        br.extend(f.breaks(&shifted).into_iter().map(|b| b - s * v[j]));
        br
    };
    if d == 1 {
        quad::integrate_with_breaks(
            |x| (f.eval(&[x + s * v[0]]) - f.eval(&[x])).abs(),
            padded.lo[0],
            padded.hi[0],
            &both(&[]),
            1e-11,
        )
    } else if d == 2 {
        quad::integrate_with_breaks(
            |x| {
                quad::integrate_with_breaks(
                    |y| (f.eval(&[x + s * v[0], y + s * v[1]]) - f.eval(&[x, y])).abs(),
                    padded.lo[1],
                    padded.hi[1],
                    &both(&[x]),
                    1e-8,
                )
                .unwrap_or(f64::NAN)
            },
            padded.lo[0],
            padded.hi[0],
            &both(&[]),
            1e-6,
        )
    } else {
        Ok(grid_sum(&padded, 64, |x| {
            let sh: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + s * b).collect();
            [(f.eval(&sh) - f.eval(x)).abs(), 0.0, 0.0]
        })[0])
    }
}

/// SI of a ground truth, using its own box and breakpoints.
pub fn estimate_si_truth(f: &GroundTruth, v: &[f64], kappa: f64) -> Result<f64> {
    estimate_si(f, &f.law.support_box(), v, kappa)
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut dmax = 0.0_f64;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        dmax = dmax.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    dmax
}

/// Asymptotic critical value of the KS statistic at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_name(name: &str, d: usize) -> GroundTruth {
        registry(name, d, &Value::Null).unwrap()
    }

    #[test]
    fn zoo_densities_integrate_to_one() {
        for g in zoo() {
            let bx = g.law.support_box();
            let n = if g.dim() == 1 { 200_000 } else { 1500 };
            let m = grid_sum(&bx, n, |x| [g.pdf(x), 0.0, 0.0])[0];
            assert!((m - 1.0).abs() < 1e-3, "{}: {m}", g.name);
            if g.dim() == 1 {
                let br = g.law.breaks();
                let (lo, hi) = (bx.lo[0], bx.hi[0]);
                let q = quad::integrate_with_breaks(|x| g.pdf(&[x]), lo, hi, &br, 1e-10).unwrap();
                assert!((q - 1.0).abs() < 1e-4, "{}: {q}", g.name);
            }
        }
    }

    #[test]
    fn samplers_match_moments() {
        let mut rng = Stream::new(3).rng();
        for g in zoo() {
            let d = g.dim();
            let n = 100_000;
            let mut m = vec![0.0; d];
            let mut m2 = vec![0.0; d];
            for _ in 0..n {
                let x = g.sample(&mut rng);
                for j in 0..d {
                    m[j] += x[j];
                    m2[j] += x[j] * x[j];
                }
            }
            let cov = g.covariance();
            let mu = g.mean();
            for j in 0..d {
                let var = cov[j * d + j];
                let mean = m[j] / n as f64;
                assert!((mean - mu[j]).abs() < 5.0 * (var / n as f64).sqrt(), "{} mean", g.name);
                let v = m2[j] / n as f64 - mean * mean;
                assert!((v / var - 1.0).abs() < 0.05, "{} var {v} vs {var}", g.name);
            }
        }
    }

    #[test]
    fn one_dimensional_samplers_pass_ks() {
        for g in zoo().into_iter().filter(|g| g.dim() == 1) {
            let mut rng = Stream::new(17).rng();
            let mut xs: Vec<f64> = (0..20_000).map(|_| g.sample(&mut rng)[0]).collect();
            let ks = ks_statistic(&mut xs, |x| g.law.cdf(x).unwrap());
            assert!(ks < ks_critical(xs.len(), 1e-3), "{}: {ks}", g.name);
        }
    }

    #[test]
    fn contamination_mixes() {
        let f = by_name("uniform-interval", 1);
        let noise = registry("uniform-interval", 1, &serde_json::json!({"lo": 50.0, "hi": 51.0})).unwrap();
        assert_eq!(contaminate(&f, &noise, 0.0).unwrap(), f);
        assert_eq!(contaminate(&f, &noise, 1.0).unwrap(), noise);
        let mix = contaminate(&f, &noise, 0.1).unwrap();
        let mut rng = Stream::new(1).rng();
        let n = 100_000;
        let hits = (0..n).filter(|_| mix.sample(&mut rng)[0] > 10.0).count();
        assert!((hits as f64 / n as f64 - 0.1).abs() < 0.01);
        assert!((mix.pdf(&[50.5]) - 0.1).abs() < 1e-12);
        assert!(contaminate(&f, &by_name("gaussian", 2), 0.1).is_err());
    }

    #[test]
    fn tv_examples() {
        let u01 = registry("uniform-interval", 1, &serde_json::json!({"lo": 0.0, "hi": 1.0})).unwrap();
        let u12 = registry("uniform-interval", 1, &serde_json::json!({"lo": 1.0, "hi": 2.0})).unwrap();
        let uh = registry("uniform-interval", 1, &serde_json::json!({"lo": 0.5, "hi": 1.5})).unwrap();
        let bx = Bounds::new(vec![-1.0], vec![3.0]);
        let g = TvMode::Grid(1 << 14);
        assert!(estimate_tv(&u01, &u01, &bx, g).unwrap().tv < 1e-12);
        assert!((estimate_tv(&u01, &u12, &bx, g).unwrap().tv - 2.0).abs() < 1e-3);
        assert!((estimate_tv(&u01, &uh, &bx, g).unwrap().tv - 1.0).abs() < 1e-3);
        let mc = estimate_tv(&u01, &uh, &bx, TvMode::MonteCarlo { points: 200_000, seed: 1 }).unwrap();
        assert!((mc.tv - 1.0).abs() < 3.0 * mc.stderr + 1e-9);
        let narrow = Bounds::new(vec![0.0], vec![1.2]);
        assert!(matches!(estimate_tv(&u01, &u12, &narrow, g), Err(Error::Coverage(_))));
    }

    #[test]
    fn si_examples() {
        let n = by_name("gaussian", 1);
        for k in [0.01, 0.1, 0.5, 1.0] {
            assert!(estimate_si_truth(&n, &[1.0], k).unwrap() <= 1.0 + 1e-6);
        }
        let u = by_name("uniform-interval", 1);
        assert!((estimate_si_truth(&u, &[1.0], 0.001).unwrap() - 2.0).abs() < 1e-6);
        let e = by_name("shifted-exponential", 1);
        let a = estimate_si_truth(&e, &[1.0], 0.3).unwrap();
        let b = estimate_si_truth(&e, &[-1.0], 0.3).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn registry_round_trips_through_json() {
        let g = contaminate(&by_name("laplace", 1), &by_name("uniform-interval", 1), 0.2).unwrap();
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(GroundTruth::from_spec(&v).unwrap(), g);
        let named = GroundTruth::from_spec(&serde_json::json!({"name": "uniform-ball", "d": 2})).unwrap();
        assert_eq!(named.dim(), 2);
        assert!(GroundTruth::from_spec(&serde_json::json!({"name": "nope"})).is_err());
    }
    #[test]
    fn declared_tails_hold_empirically() {
        for g in zoo() {
            let tail = g.class.as_ref().unwrap().tail.clone();
            let mu = g.mean();
            let mut rng = Stream::new(11).rng();
            let n = 100_000;
            let mut r: Vec<f64> = (0..n)
                .map(|_| {
                    let x = g.sample(&mut rng);
                    let dx: Vec<f64> = x.iter().zip(&mu).map(|(a, b)| a - b).collect();
                    norm(&dx)
                })
                .collect();
            r.sort_by(|a, b| a.total_cmp(b));
            let scale = r[n / 2].max(1e-3);
            for k in 1..=40 {
                let t = scale * k as f64 * 0.25;
                let emp = (n - r.partition_point(|&v| v <= t)) as f64 / n as f64;
                let se = (emp * (1.0 - emp) / n as f64).sqrt().max(1.0 / n as f64);
                assert!(emp <= tail.eval(t) + 3.0 * se, "{} t={t}: {emp} > {}", g.name, tail.eval(t));
            }
        }
    }

    #[test]
    fn declared_constants_bound_shift_invariance() {
        for g in zoo() {
            let c = g.class.as_ref().unwrap().c;
            let dirs: Vec<Vec<f64>> = if g.dim() == 1 {
                vec![vec![1.0], vec![-1.0]]
            } else {
                (0..4)
                    .map(|k| {
                        let a = PI * k as f64 / 4.0;
                        vec![a.cos(), a.sin()]
                    })
                    .collect()
            };
            for kappa in [0.01, 0.1] {
                for v in &dirs {
                    let si = estimate_si_truth(&g, v, kappa).unwrap();
                    assert!(si <= c * (1.0 + 1e-2), "{} kappa={kappa}: {si} > {c}", g.name);
                }
            }
        }
    }

    #[test]
    fn two_dimensional_pdfs_integrate_to_one() {
        for g in zoo().into_iter().filter(|g| g.dim() == 2) {
            let bx = g.law.support_box();
            // breaks at the disc edge; harmless for the smooth members
            let m = quad::integrate_with_breaks(
                |x| {
                    let e = (0.25 - x * x).max(0.0).sqrt();
                    quad::integrate_with_breaks(|y| g.pdf(&[x, y]), bx.lo[1], bx.hi[1], &[-e, e], 1e-10).unwrap()
                },
                bx.lo[0],
                bx.hi[0],
                &[-0.5, 0.5],
                1e-8,
            )
            .unwrap();
            assert!((m - 1.0).abs() < 1e-4, "{}: {m}", g.name);
        }
    }

    #[test]
    fn grid_and_monte_carlo_tv_agree() {
        let z = zoo();
        for (i, a) in z.iter().enumerate() {
            for b in &z[i + 1..] {
                if a.dim() != b.dim() {
                    continue;
                }
                // dyadic cells so every jump of the zoo densities sits on a grid line
                let h = if a.dim() == 1 { 1.0 / 1024.0 } else { 1.0 / 64.0 };
                let u = a.law.support_box().union(&b.law.support_box());
                let lo: Vec<f64> = u.lo.iter().map(|v| (v / 8.0).floor() * 8.0).collect();
                let w = (0..a.dim()).map(|j| ((u.hi[j] - lo[j]) / 8.0).ceil() * 8.0).fold(0.0, f64::max);
                let bx = Bounds::new(lo.clone(), lo.iter().map(|v| v + w).collect());
                let n = (w / h) as usize;
                let g = estimate_tv(a, b, &bx, TvMode::Grid(n)).unwrap_or_else(|e| panic!("{} vs {}: {e}", a.name, b.name));
                let mc = estimate_tv(a, b, &bx, TvMode::MonteCarlo { points: 400_000, seed: 5 }).unwrap();
                assert!(
                    (g.tv - mc.tv).abs() <= 3.0 * mc.stderr + 5e-3,
                    "{} vs {}: grid {} mc {} ± {}",
                    a.name,
                    b.name,
                    g.tv,
                    mc.tv,
                    mc.stderr
                );
            }
        }
    }
}
