//! Run the full pipeline on the one-dimensional members of the synthetic zoo
//! and report each hypothesis's distance to the truth.

use std::time::Instant;

use fourier_density::pipeline::{learn, PipelineConfig};
use fourier_density::synthetic::{tv_hypothesis_to_truth, zoo, TvMode};
use fourier_density::Stream;

fn main() -> fourier_density::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let eps = 0.2;
    for f in zoo().into_iter().filter(|f| f.dim() == 1) {
        let class = f.class.clone().expect("zoo members declare a class");
        let cfg = PipelineConfig::new(class, eps, 0.1).with_learner(1.0, 0.05, Some(32)).with_runs(3);
        let start = Instant::now();
        let out = learn(&f, &cfg, Stream::new(seed))?;
        let tv = tv_hypothesis_to_truth(&out.hypothesis.h, &f, TvMode::Grid(1 << 14))?;
        println!(
            "{:<24} {:>9} samples  TV {:.4} (6 eps = {:.1})  {:.1?}",
            f.name,
            out.report.total_samples,
            tv.tv,
            6.0 * eps,
            start.elapsed()
        );
    }
    Ok(())
}
