//! How the bounded learner's cutoff and sample budget grow as ε shrinks, with
//! the fitted log-log slope of samples against 1/ε.

use std::time::Instant;

use fourier_density::cli::loglog_slope;
use fourier_density::learn_bounded::{derive_parameters, learn_bounded, BoundedLearnerParams};
use fourier_density::synthetic::{registry, tv_hypothesis_to_truth, TvMode};
use fourier_density::transform::pull_back_hypothesis;
use fourier_density::{AffineFrame, Stream};
use serde_json::json;

fn main() -> fourier_density::Result<()> {
    let run = std::env::args().any(|a| a == "--run");
    let f = registry("uniform-interval", 1, &json!({}))?;
    let (mut inv, mut samples) = (Vec::new(), Vec::new());
    for (k, eps) in [0.5, 0.4, 0.3, 0.25, 0.2, 0.15].into_iter().enumerate() {
        let p = BoundedLearnerParams::new(1, eps, eps / 4.0, 0.1);
        let plan = derive_parameters(&p)?;
        inv.push(1.0 / eps);
        samples.push(plan.s as f64);
        let mut line = format!("eps {eps:<5} T {:>5}  S {:>10}", plan.t, plan.s);
        if run && plan.s < 20_000_000 {
            let start = Instant::now();
            let out = learn_bounded(&f, &p, Stream::new(k as u64))?;
            let h = pull_back_hypothesis(out.hypothesis, &AffineFrame::new(vec![0.0], 0.25)?);
            let tv = tv_hypothesis_to_truth(&h, &f, TvMode::Grid(1 << 15))?.tv;
            line.push_str(&format!("  TV {tv:.4}  {:.1?}", start.elapsed()));
        }
        println!("{line}");
    }
    println!("log-log slope of S against 1/eps: {:.2}", loglog_slope(&inv, &samples));
    if !run {
        println!("(pass --run to also learn and measure TV at each eps)");
    }
    Ok(())
}
