//! Full pipeline on N(0, 0.01), clean and with 10% of the mass moved to Uniform[0.3, 0.5].

use std::time::Instant;

use fourier_density::pipeline::{learn, PipelineConfig};
use fourier_density::synthetic::{contaminate, registry, tv_hypothesis_to_truth, TvMode};
use fourier_density::{ClassParams, Stream, TailBound};
use serde_json::json;

fn main() -> fourier_density::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let f = registry("gaussian", 1, &json!({"sigma": 0.1}))?;
    let noise = registry("uniform-interval", 1, &json!({"lo": 0.3, "hi": 0.5}))?;
    let class = ClassParams::new(10.0, 1, TailBound::exponential(0.1))?;
    let cfg = PipelineConfig::new(class, 0.15, 0.1).with_learner(1.0, 0.25, Some(32));

    for (label, target) in [("clean", f.clone()), ("contaminated", contaminate(&f, &noise, 0.1)?)] {
        let start = Instant::now();
        let out = learn(&target, &cfg, Stream::new(seed))?;
        let tv = tv_hypothesis_to_truth(&out.hypothesis.h, &target, TvMode::Grid(1 << 14))?;
        let feasible = out.report.candidates.iter().filter(|c| c.feasible).count();
        println!(
            "{label}: {} runs, {feasible} feasible, winner run {}, {} samples, {:.1?}; TV {:.4} (budget {:.2})",
            out.report.runs,
            out.report.winner,
            out.report.total_samples,
            start.elapsed(),
            tv.tv,
            6.0 * cfg.eps
        );
    }
    Ok(())
}
