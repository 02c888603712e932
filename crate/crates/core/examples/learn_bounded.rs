//! Learn Uniform[-1/2, 1/2] with the bounded-support learner and report the L1 error.

use std::time::Instant;

use fourier_density::learn_bounded::{learn_bounded, BoundedLearnerParams};
use fourier_density::oracle::FnOracle;
use fourier_density::quad::midpoints;
use fourier_density::rng::StreamRng;
use fourier_density::Stream;
use rand::Rng;

fn main() -> fourier_density::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let target = FnOracle::new(1, |r: &mut StreamRng, o: &mut [f64]| o[0] = r.random_range(-0.5..0.5));
    let params = BoundedLearnerParams::new(1, 0.3, 0.075, 0.1);

    let start = Instant::now();
    let out = learn_bounded(&target, &params, Stream::new(seed))?;
    println!(
        "T = {}, S = {}, eta = {:.3e}, learned in {:.1?}",
        out.plan.t,
        out.plan.s,
        out.plan.eta,
        start.elapsed()
    );

    let n = 1 << 14;
    let h = out.hypothesis.grid_values(n)?;
    let tv: f64 = midpoints(-1.0, 1.0, n)
        .iter()
        .zip(&h)
        .map(|(&z, &v)| (v - if z.abs() < 0.5 { 1.0 } else { 0.0 }).abs())
        .sum::<f64>()
        * (2.0 / n as f64);
    println!("L1 error to the target: {tv:.4} (budget 0.3)");
    Ok(())
}
