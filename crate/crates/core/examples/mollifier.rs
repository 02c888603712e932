//! The bump mollifier: its normalizing constant, moments, a sampler check,
//! and the decay of its Fourier transform.

use fourier_density::mollifier::{c0, cdf_b, eval_b, fourier_b_numeric, variance_b, MollifierParams};
use fourier_density::synthetic::{ks_critical, ks_statistic};
use fourier_density::Stream;

fn main() -> fourier_density::Result<()> {
    println!("c0 = {:.6}, b(0) = {:.6}, b(0.5) = {:.6}, Var = {:.6}", c0(), eval_b(0.0), eval_b(0.5), variance_b());

    let gamma = 0.5;
    let m = MollifierParams::new(1, gamma)?;
    let mut rng = Stream::new(1).rng();
    let n = 20_000;
    let mut draws: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)[0]).collect();
    let ks = ks_statistic(&mut draws, |x| cdf_b(x / gamma));
    println!("sampler at gamma = {gamma}: KS statistic {ks:.4} over {n} draws (5% critical value {:.4})", ks_critical(n, 0.05));

    for xi in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        let v = fourier_b_numeric(xi).norm();
        let bound = (-f64::sqrt(xi)).exp() * xi.powf(-0.75);
        println!("|b^({xi:>4})| = {v:.3e}   e^-sqrt(xi) xi^-3/4 = {bound:.3e}");
    }
    Ok(())
}
