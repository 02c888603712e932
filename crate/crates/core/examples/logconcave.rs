//! Log-concave learning: a Laplace law with 10% of the mass moved far away,
//! and a clean anisotropic Gaussian in the plane.
//!
//! Usage: logconcave [seed] [cutoff_cap] [c_s] [runs] [mass_eps]

use std::time::Instant;

use fourier_density::logconcave::{learn_logconcave, LogConcaveConfig};
use fourier_density::synthetic::{contaminate, registry, tv_hypothesis_to_truth, TvMode};
use fourier_density::Stream;
use serde_json::json;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> fourier_density::Result<()> {
    let seed: u64 = arg(1, 1);
    let cap: usize = arg(2, 1024);
    let c_s: f64 = arg(3, 0.005);
    let runs: usize = arg(4, 3);
    let mass_eps: f64 = arg(5, 0.25);

    let laplace = registry("laplace", 1, &json!({"scale": 1.0}))?;
    let far = registry("uniform-interval", 1, &json!({"lo": 50.0, "hi": 51.0}))?;
    let target = contaminate(&laplace, &far, 0.1)?;
    let mut cfg = LogConcaveConfig::new(1, 0.1, 0.1);
    cfg.cutoff_cap = Some(cap);
    cfg.c_s = c_s;
    cfg.runs = Some(runs);
    cfg.mass_eps = Some(mass_eps);
    let start = Instant::now();
    let out = learn_logconcave(&target, &cfg, Stream::new(seed))?;
    let tv = tv_hypothesis_to_truth(&out.hypothesis.h, &laplace, TvMode::Grid(1 << 16))?;
    println!(
        "laplace + 10% at [50,51]: {} attempts, winner {}, sigma^2 estimate {:.1}, {} samples, {:.1?}; TV to clean {:.4} (target 0.6)",
        out.attempts.len(),
        out.winner,
        out.estimate.sigma[0],
        out.total_samples,
        start.elapsed(),
        tv.tv
    );

    let gauss = registry("anisotropic-gaussian", 2, &json!({}))?;
    let mut cfg = LogConcaveConfig::new(2, 0.25, 0.1);
    cfg.cutoff_cap = Some(arg(6, 24));
    cfg.c_s = arg(7, 0.05);
    cfg.runs = Some(runs);
    let start = Instant::now();
    let out = learn_logconcave(&gauss, &cfg, Stream::new(seed))?;
    let tv = tv_hypothesis_to_truth(&out.hypothesis.h, &gauss, TvMode::MonteCarlo { points: 400_000, seed })?;
    println!(
        "N(0, diag(4,1)): {} attempts, winner {}, eigenvalues {:.2?}, {} samples, {:.1?}; TV {:.4} ± {:.4} (target {:.2})",
        out.attempts.len(),
        out.winner,
        out.estimate.eigenvalues,
        out.total_samples,
        start.elapsed(),
        tv.tv,
        tv.stderr,
        6.0 * cfg.eps
    );
    Ok(())
}
