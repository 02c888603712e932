//! A Scheffé tournament between a learned hypothesis, a displaced copy of it
//! and a flat density, with every pairwise outcome printed.

use fourier_density::fourier::{FourierHypothesis, FrequencySet};
use fourier_density::learn_bounded::{h_max_tight, learn_bounded, BoundedLearnerParams};
use fourier_density::select::{estimate_mass, scheffe_select, CandidateHypothesis, SelectParams};
use fourier_density::synthetic::{registry, tv_hypothesis_to_truth, TvMode};
use fourier_density::transform::pull_back_hypothesis;
use fourier_density::{AffineFrame, Stream};
use num_complex::Complex64;
use serde_json::json;

fn candidate(h: FourierHypothesis, frame: AffineFrame, stream: Stream) -> fourier_density::Result<CandidateHypothesis> {
    let hm = h_max_tight(&h);
    let z = estimate_mass(&h, hm, 0.05, 0.1, stream)?;
    Ok(CandidateHypothesis::new(pull_back_hypothesis(h, &frame), z, hm))
}

fn main() -> fourier_density::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let stream = Stream::new(seed);
    let f = registry("uniform-interval", 1, &json!({}))?;
    let p = BoundedLearnerParams::new(1, 0.3, 0.075, 0.1)
        .with_constants(1.0, 0.02)
        .with_cutoff_cap(Some(32));
    let h = learn_bounded(&f, &p, stream.named("learn"))?.hypothesis;
    let flat = FourierHypothesis::new(FrequencySet::build(1, 0)?, vec![Complex64::new(1.0, 0.0)], true)?;

    let cands = vec![
        candidate(flat, AffineFrame::new(vec![0.0], 1.0)?, stream.named("mass").split(0))?,
        candidate(h.clone(), AffineFrame::new(vec![1.0], 0.25)?, stream.named("mass").split(1))?,
        candidate(h, AffineFrame::new(vec![0.0], 0.25)?, stream.named("mass").split(2))?,
    ];
    let labels = ["flat on [-2, 2]", "learned, shifted by 1", "learned"];
    for (label, c) in labels.iter().zip(&cands) {
        let tv = tv_hypothesis_to_truth(&c.h, &f, TvMode::Grid(1 << 14))?.tv;
        println!("{label:<22} mass estimate {:.3}, TV to target {tv:.4}", c.z_hat);
    }

    let report = scheffe_select(&cands, &f, &SelectParams::new(0.05, 0.1), stream.named("select"))?;
    println!("{} draws per distribution", report.m);
    for r in &report.pairs {
        println!("  ({}, {}): p_i {:.3}, p_j {:.3}, tau {:.3} -> {:?}", r.i, r.j, r.p_i, r.p_j, r.tau, r.outcome);
    }
    println!("winner: {}", labels[report.winner]);
    Ok(())
}
