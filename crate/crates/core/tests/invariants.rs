//! Statistical and quadrature invariants of the learner's building blocks,
//! each on fixed seeds.

use std::f64::consts::PI;

use fourier_density::domain::norm;
use fourier_density::fourier::{estimate_coefficients, FrequencySet};
use fourier_density::learn_bounded::{derive_parameters, learn_bounded, BoundedLearnerParams};
use fourier_density::mollifier::{cdf_b, eval_b, fourier_b_dgamma_numeric, MollifierParams};
use fourier_density::oracle::draw_n;
use fourier_density::quad;
use fourier_density::synthetic::{estimate_si, registry, zoo, Bounds, DensityFn, FnDensity};
use fourier_density::transform::{compute_transformation, transformation_sample_count};
use fourier_density::{SampleSet, Stream};
use num_complex::Complex64;
use rand::Rng;
use serde_json::json;

/// f̂(ξ) of Uniform[−1/2, 1/2] under ∫f(x)e^{−iπξx}dx.
fn uniform_hat(xi: f64) -> f64 {
    if xi == 0.0 {
        1.0
    } else {
        2.0 * (PI * xi / 2.0).sin() / (PI * xi)
    }
}

fn uniform_samples(n: usize, seed: u64) -> SampleSet {
    let mut rng = Stream::new(seed).rng();
    SampleSet::from_flat(1, (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap()
}

#[test]
fn convolution_theorem() {
    let gamma = 0.2;
    let m = MollifierParams::new(1, gamma).unwrap();
    let s = 100_000;
    let mut rng = Stream::new(11).rng();
    let pts: Vec<f64> = (0..s)
        .map(|_| rng.random_range(-0.5..0.5) + m.sample(&mut rng)[0])
        .collect();
    let h = estimate_coefficients(&SampleSet::from_flat(1, pts).unwrap(), FrequencySet::build(1, 3).unwrap()).unwrap();
    for xi in 1..=3i64 {
        let want = uniform_hat(xi as f64) * fourier_b_dgamma_numeric(&[xi], gamma);
        let got = h.coeff(&[xi]).unwrap();
        assert!((got - want).norm() <= 3.0 / (s as f64).sqrt(), "xi={xi}: {got} vs {want}");
    }
}

#[test]
fn hoeffding_coefficient_error() {
    let s = 2000;
    let bound = (2.0 * 400f64.ln() / s as f64).sqrt();
    let freqs = FrequencySet::build(1, 3).unwrap();
    let mut ok = 0;
    let mut total = 0;
    for rep in 0..200 {
        let h = estimate_coefficients(&uniform_samples(s, 500 + rep), freqs).unwrap();
        for xi in 1..=3i64 {
            let err = (h.coeff(&[xi]).unwrap() - Complex64::new(uniform_hat(xi as f64), 0.0)).norm();
            total += 1;
            if err <= bound {
                ok += 1;
            }
        }
    }
    assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
}

#[test]
fn young_inequality_for_the_mollified_uniform() {
    for gamma in [0.05, 0.2, 0.5] {
        let conv = |x: f64| cdf_b((x + 0.5) / gamma) - cdf_b((x - 0.5) / gamma);
        let lim = 0.5 + gamma;
        let br = [-0.5 - gamma, -0.5 + gamma, 0.5 - gamma, 0.5 + gamma];
        let lhs = quad::integrate_with_breaks(|x| conv(x).powi(2), -lim, lim, &br, 1e-12).unwrap().sqrt();
        let b2 = quad::integrate(|y| eval_b(y).powi(2), -1.0, 1.0, 1e-13, 1e-13).unwrap() / gamma;
        assert!(lhs <= b2.sqrt(), "gamma={gamma}: {lhs} > {}", b2.sqrt());
    }
}

#[test]
fn tail_energy_and_mollification_proximity() {
    let (eps, kappa) = (0.3, 0.075);
    let plan = derive_parameters(&BoundedLearnerParams::new(1, eps, kappa, 0.1)).unwrap();
    let energy: f64 = (plan.t as i64 + 1..=4 * plan.t as i64)
        .map(|k| 2.0 * (uniform_hat(k as f64) * fourier_b_dgamma_numeric(&[k], plan.gamma).norm()).powi(2))
        .sum();
    assert!(energy <= eps * eps / 8.0, "{energy}");

    let g = plan.gamma;
    let q = |x: f64| (cdf_b((x + 0.5) / g) - cdf_b((x - 0.5) / g)) - if x.abs() < 0.5 { 1.0 } else { 0.0 };
    let br = [-0.5 - g, -0.5, -0.5 + g, 0.5 - g, 0.5, 0.5 + g];
    let tv = quad::integrate_with_breaks(|x| q(x).abs(), -0.5 - g, 0.5 + g, &br, 1e-12).unwrap();
    assert!(tv <= eps / 2.0, "{tv}");
}

#[test]
fn learned_hypothesis_is_nonnegative() {
    let f = registry("uniform-interval", 1, &json!({})).unwrap();
    let p = BoundedLearnerParams::new(1, 0.3, 0.075, 0.1)
        .with_constants(1.0, 0.01)
        .with_cutoff_cap(Some(48));
    let out = learn_bounded(&f, &p, Stream::new(3)).unwrap();
    let mut ev = out.hypothesis.evaluator();
    for k in 0..10_000 {
        assert!(ev.value(&[-1.0 + 2.0 * (k as f64 + 0.5) / 1e4]) >= 0.0);
    }
}

#[test]
fn second_moment_is_at_most_the_tail_integral() {
    let mut rng = Stream::new(21).rng();
    for f in zoo() {
        let class = f.class.clone().expect("zoo members declare a class");
        let ig = class.tail.integral().unwrap();
        let mu = f.mean();
        let n = 50_000;
        let r2: Vec<f64> = (0..n)
            .map(|_| {
                let x = f.sample(&mut rng);
                norm(&x.iter().zip(&mu).map(|(a, b)| a - b).collect::<Vec<_>>()).powi(2)
            })
            .collect();
        let m = r2.iter().sum::<f64>() / n as f64;
        let se = (r2.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 * (n as f64 - 1.0))).sqrt();
        assert!(m <= ig + 3.0 * se, "{}: E|x-mu|^2 = {m}, I_g = {ig}", f.name);
    }
}

#[test]
fn mean_estimate_deviation_frequency() {
    let f = registry("gaussian", 1, &json!({})).unwrap();
    let tail = f.class.clone().unwrap().tail;
    let ig = tail.integral().unwrap();
    let m = transformation_sample_count(&tail).unwrap();
    let trials = 1000;
    let mut devs = Vec::with_capacity(trials);
    for k in 0..trials {
        let (s, _) = draw_n(&f, m, Stream::new(9).split(k as u64)).unwrap();
        devs.push(s.mean().unwrap()[0].powi(2));
    }
    for b in [0.05, 0.2, 0.5] {
        let t = ig / (m as f64 * b);
        let freq = devs.iter().filter(|&&v| v >= t).count() as f64 / trials as f64;
        assert!(freq <= b + 3.0 * (b * (1.0 - b) / trials as f64).sqrt(), "b={b}: {freq}");
    }
}

#[test]
fn conditioned_uniform_shift_invariance() {
    // Uniform[−1/2, 1/2] (c = 2) conditioned on [−1/2, 1/2 − δ₀]
    for delta0 in [0.05, 0.1, 0.2] {
        let hi = 0.5 - delta0;
        let fb = FnDensity {
            dim: 1,
            f: move |x: &[f64]| if (-0.5..hi).contains(&x[0]) { 1.0 / (1.0 - delta0) } else { 0.0 },
            mass: Some(1.0),
            jumps: vec![-0.5, hi],
        };
        let bx = Bounds::new(vec![-0.5], vec![hi]);
        for kappa in [0.01, 0.05, 0.1] {
            let si = estimate_si(&fb, &bx, &[1.0], kappa).unwrap();
            assert!(si <= 4.0 * delta0 / kappa + 4.0, "delta0={delta0}, kappa={kappa}: {si}");
        }
    }
}

#[test]
fn conditioned_and_mapped_shift_invariance() {
    let f = registry("truncated-exponential", 1, &json!({})).unwrap();
    let class = f.class.clone().unwrap();
    let eps = 0.1;
    let m = transformation_sample_count(&class.tail).unwrap();
    let (pts, _) = draw_n(&f, m, Stream::new(4)).unwrap();
    let frame = compute_transformation(&pts, &class.tail, eps).unwrap();
    let s = frame.scale();
    let mu = frame.mu[0];
    let inside = |y: f64| y.abs() <= 0.5;
    let mass = quad::integrate_with_breaks(
        |y| if inside(y) { s * f.pdf(&[mu + s * y]) } else { 0.0 },
        -0.5,
        0.5,
        &f.breaks(&[]).iter().map(|b| (b - mu) / s).collect::<Vec<_>>(),
        1e-12,
    )
    .unwrap();
    let mut jumps: Vec<f64> = f.breaks(&[]).iter().map(|b| (b - mu) / s).collect();
    jumps.extend([-0.5, 0.5]);
    let fs = FnDensity {
        dim: 1,
        f: |y: &[f64]| if inside(y[0]) { s * f.pdf(&[mu + s * y[0]]) / mass } else { 0.0 },
        mass: Some(1.0),
        jumps,
    };
    let bx = Bounds::new(vec![-0.5], vec![0.5]);
    for kappa in [0.001, 0.01, 0.05] {
        let si = estimate_si(&fs, &bx, &[1.0], kappa).unwrap();
        let bound = 4.0 * eps / kappa + 4.0 * class.c * frame.t.sqrt();
        assert!(si <= bound, "kappa={kappa}: {si} > {bound}");
    }
}
