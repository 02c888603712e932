//! End-to-end learner: D independent frames, a bounded learner per frame,
//! mass estimates, and a selection tournament over the feasible candidates.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{ClassParams, TailBound};
use crate::error::{Error, Result};
use crate::json::F17;
use crate::learn_bounded::{h_max_tight, learn_bounded, BoundedLearnerParams, DEFAULT_SAMPLE_CAP};
use crate::fourier::DEFAULT_LOW_CAP;
use crate::oracle::{draw_n, Counted, Oracle};
use crate::rng::Stream;
use crate::select::{estimate_mass, scheffe_select, CandidateHypothesis, SelectParams, SelectionReport};
use crate::transform::{
    compute_transformation, condition_and_map, pull_back_hypothesis, transformation_sample_count, AffineFrame,
    DEFAULT_MAX_REJECTS,
};

/// Largest candidate-run count the full schedule may request.
pub const MAX_RUNS: usize = 1_000_000;

/// How many frames to draw.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Schedule {
    /// D = ⌈20·ln(1/δ)⌉.
    Desk,
    /// D = ⌈e^{a·I_g}·ln(1/δ)⌉.
    Full { a: f64 },
    /// Exactly this many.
    Fixed { runs: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub class: ClassParams,
    pub eps: f64,
    pub delta: f64,
    pub schedule: Schedule,
    /// Learner constants (see `BoundedLearnerParams`).
    pub c_t: f64,
    pub c_s: f64,
    pub cutoff_cap: Option<usize>,
    pub low_cap: u64,
    pub sample_cap: u64,
    /// Additive accuracy of the mass estimates; ε when `None`.
    pub mass_eps: Option<f64>,
    pub max_rejects: u64,
    pub select_c_m: f64,
    pub select_draw_factor: f64,
}

impl PipelineConfig {
    pub fn new(class: ClassParams, eps: f64, delta: f64) -> Self {
        PipelineConfig {
            class,
            eps,
            delta,
            schedule: Schedule::Desk,
            c_t: 1.0,
            c_s: 1.0,
            cutoff_cap: None,
            low_cap: DEFAULT_LOW_CAP,
            sample_cap: DEFAULT_SAMPLE_CAP,
            mass_eps: None,
            max_rejects: DEFAULT_MAX_REJECTS,
            select_c_m: 48.0,
            select_draw_factor: 6.0,
        }
    }

    pub fn with_runs(mut self, runs: usize) -> Self {
        self.schedule = Schedule::Fixed { runs };
        self
    }

    pub fn with_learner(mut self, c_t: f64, c_s: f64, cutoff_cap: Option<usize>) -> Self {
        self.c_t = c_t;
        self.c_s = c_s;
        self.cutoff_cap = cutoff_cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5 && self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!(
                "need 0 < eps < 1/2 and 0 < delta < 1, got eps={}, delta={}",
                self.eps, self.delta
            )));
        }
        if matches!(self.schedule, Schedule::Fixed { runs: 0 }) {
            return Err(Error::Parameter("at least one candidate run is required".into()));
        }
        if let Schedule::Full { a } = self.schedule {
            if !(a > 0.0) {
                return Err(Error::Parameter(format!("schedule constant must be positive, got {a}")));
            }
        }
        Ok(())
    }

    /// The tail actually used (floored when its half-mass radius is below 1/10).
    pub fn tail(&self) -> TailBound {
        self.class.tail.enforce_floor()
    }

    /// Number of candidate runs D.
    pub fn runs(&self) -> Result<usize> {
        let l = (1.0 / self.delta).ln();
        let d = match self.schedule {
            Schedule::Fixed { runs } => return Ok(runs),
            Schedule::Desk => (20.0 * l).ceil(),
            Schedule::Full { a } => ((a * self.tail().integral()?).exp() * l).ceil(),
        };
        if !(d <= MAX_RUNS as f64) {
            return Err(Error::Resource(format!("schedule asks for {d:e} candidate runs")));
        }
        Ok((d as usize).max(1))
    }

    /// κ = min{ε/2, ε/(4·g⁻¹(ε)·c)}.
    pub fn kappa(&self) -> Result<f64> {
        let r = self.tail().inverse(self.eps)?;
        Ok((self.eps / 2.0).min(self.eps / (4.0 * r * self.class.c)))
    }

    pub fn learner(&self) -> Result<BoundedLearnerParams> {
        let mut p = BoundedLearnerParams::new(self.class.d, self.eps, self.kappa()?, self.delta)
            .with_constants(self.c_t, self.c_s)
            .with_cutoff_cap(self.cutoff_cap);
        p.low_cap = self.low_cap;
        p.sample_cap = self.sample_cap;
        Ok(p)
    }

    pub fn select_params(&self) -> SelectParams {
        let mut s = SelectParams::new(self.eps, self.delta);
        s.c_m = self.select_c_m;
        s.draw_factor = self.select_draw_factor;
        s
    }
}

/// What happened to one frame.
#[derive(Clone, Debug, Serialize)]
pub struct FrameReport {
    pub run: usize,
    pub frame: Option<AffineFrame>,
    pub feasible: bool,
    pub z_hat: Option<F17>,
    pub h_max: Option<F17>,
    pub samples_used: u64,
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Candidates {
    /// Feasible candidates, in run order.
    pub feasible: Vec<CandidateHypothesis>,
    /// Run index of each feasible candidate.
    pub runs: Vec<usize>,
    pub reports: Vec<FrameReport>,
    pub samples_used: u64,
}

struct RunResult {
    candidate: Option<CandidateHypothesis>,
    report: FrameReport,
}

fn one_run<O: Oracle + ?Sized>(oracle: &O, cfg: &PipelineConfig, run: usize, stream: Stream) -> Result<RunResult> {
    let tail = cfg.tail();
    let counted = Counted::new(oracle);
    let m = transformation_sample_count(&tail)?.max(1);
    let (pts, _) = draw_n(&counted, m, stream.named("frame"))?;
    let frame = compute_transformation(&pts, &tail, cfg.eps)?;
    let cond = condition_and_map(&counted, &frame, cfg.max_rejects);
    let params = cfg.learner()?;
    let mut report = FrameReport {
        run,
        frame: Some(frame.clone()),
        feasible: false,
        z_hat: None,
        h_max: None,
        samples_used: 0,
        note: None,
    };
    let learned = match learn_bounded(&cond, &params, stream.named("learn")) {
        Ok(o) => o,
        Err(Error::Stalled { trials }) => {
            report.samples_used = counted.count();
            report.note = Some(format!(
                "conditioning stalled after {trials} consecutive rejections (acceptance {:.3})",
                cond.acceptance_rate()
            ));
            return Ok(RunResult { candidate: None, report });
        }
        Err(e) => return Err(e),
    };
    report.samples_used = counted.count();
    let h_max = h_max_tight(&learned.hypothesis);
    let mass_eps = cfg.mass_eps.unwrap_or(cfg.eps);
    let z_hat = estimate_mass(&learned.hypothesis, h_max, mass_eps, cfg.delta, stream.named("mass"))?;
    let mut c = CandidateHypothesis::new(pull_back_hypothesis(learned.hypothesis, &frame), z_hat, h_max);
    c.frame = Some(frame);
    report.feasible = c.is_feasible();
    report.z_hat = Some(F17(z_hat));
    report.h_max = Some(F17(h_max));
    if !report.feasible {
        report.note = Some(format!("estimated mass {z_hat:.4} is below 1/2"));
    }
    Ok(RunResult {
        candidate: Some(c).filter(|c| c.is_feasible()),
        report,
    })
}

/// D independent frames, each conditioned, learned, pulled back and weighed.
/// Frames whose conditioning stalls are discarded; zero feasible candidates is
/// a pipeline failure carrying the per-frame diagnostics.
pub fn construct_candidates<O: Oracle + ?Sized>(oracle: &O, cfg: &PipelineConfig, stream: Stream) -> Result<Candidates> {
    cfg.validate()?;
    if oracle.dim() != cfg.class.d {
        return Err(Error::Parameter(format!(
            "oracle dimension {} does not match d = {}",
            oracle.dim(),
            cfg.class.d
        )));
    }
    let runs = cfg.runs()?;
    let base = stream.named("run");
    let results: Vec<RunResult> = (0..runs)
        .into_par_iter()
        .map(|r| one_run(oracle, cfg, r, base.split(r as u64)))
        .collect::<Result<_>>()?;
    let mut out = Candidates {
        feasible: Vec::new(),
        runs: Vec::new(),
        reports: Vec::with_capacity(runs),
        samples_used: 0,
    };
    for r in results {
        out.samples_used += r.report.samples_used;
        if let Some(c) = r.candidate {
            out.feasible.push(c);
            out.runs.push(r.report.run);
        }
        out.reports.push(r.report);
    }
    if out.feasible.is_empty() {
        return Err(Error::PipelineFailure {
            message: format!("none of the {runs} candidate runs produced a feasible hypothesis"),
            diagnostics: out
                .reports
                .iter()
                .map(|r| format!("run {}: {}", r.run, r.note.as_deref().unwrap_or("no candidate")))
                .collect(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub runs: usize,
    pub candidates: Vec<FrameReport>,
    /// Run index of the winner.
    pub winner: usize,
    pub selection: SelectionReport,
    pub total_samples: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub hypothesis: CandidateHypothesis,
    pub report: RunReport,
}

impl PipelineOutcome {
    /// Hypothesis JSON of the winner, with its frame.
    pub fn hypothesis_json(&self) -> Result<String> {
        self.hypothesis.h.inner.to_json(self.hypothesis.frame.as_ref())
    }
}

/// construct_candidates followed by the tournament on fresh target draws.
pub fn learn<O: Oracle + ?Sized>(oracle: &O, cfg: &PipelineConfig, stream: Stream) -> Result<PipelineOutcome> {
    let start = Instant::now();
    let cands = construct_candidates(oracle, cfg, stream.named("construct"))?;
    let sel = scheffe_select(&cands.feasible, oracle, &cfg.select_params(), stream.named("select"))?;
    let winner_run = cands.runs[sel.winner];
    let total = cands.samples_used + sel.target_draws;
    let hypothesis = cands.feasible[sel.winner].clone();
    Ok(PipelineOutcome {
        hypothesis,
        report: RunReport {
            config: cfg.clone(),
            runs: cands.reports.len(),
            candidates: cands.reports,
            winner: winner_run,
            selection: sel,
            total_samples: total,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;
    use crate::rng::StreamRng;
    use rand::Rng;

    fn uniform_class() -> ClassParams {
        ClassParams::new(2.0, 1, TailBound::bounded(0.5)).unwrap()
    }

    #[test]
    fn schedules() {
        let cfg = PipelineConfig::new(uniform_class(), 0.1, 0.1);
        assert_eq!(cfg.runs().unwrap(), 47);
        let mut full = cfg.clone();
        full.schedule = Schedule::Full { a: 1.0 };
        // I_g = 1/4
        assert_eq!(full.runs().unwrap(), (0.25f64.exp() * 10f64.ln()).ceil() as usize);
        full.schedule = Schedule::Full { a: 1e3 };
        assert!(matches!(full.runs(), Err(Error::Resource(_))));
        assert!(cfg.clone().with_runs(0).validate().is_err());
    }

    #[test]
    fn kappa_rule() {
        let cfg = PipelineConfig::new(uniform_class(), 0.2, 0.1);
        assert!((cfg.kappa().unwrap() - 0.2 / (4.0 * 0.5 * 2.0)).abs() < 1e-15);
        let loose = PipelineConfig::new(ClassParams::new(0.1, 1, TailBound::bounded(0.5)).unwrap(), 0.2, 0.1);
        assert_eq!(loose.kappa().unwrap(), 0.1);
    }

    #[test]
    fn failing_frame_is_a_pipeline_failure() {
        // mass split between ±100: the frame lands in the gap and conditioning stalls
        let far = FnOracle::new(1, |r: &mut StreamRng, o: &mut [f64]| {
            o[0] = if r.random::<bool>() { 100.0 } else { -100.0 } + r.random_range(-0.1..0.1)
        });
        let cfg = PipelineConfig::new(uniform_class(), 0.2, 0.5).with_runs(1).with_learner(1.0, 0.01, Some(4));
        match learn(&far, &cfg, Stream::new(1)) {
            Err(Error::PipelineFailure { diagnostics, .. }) => {
                assert_eq!(diagnostics.len(), 1);
                assert!(diagnostics[0].contains("stalled"), "{diagnostics:?}");
            }
            other => panic!("expected a pipeline failure, got {other:?}"),
        }
    }

    #[test]
    fn single_run_gives_at_most_one_candidate() {
        let u = FnOracle::new(1, |r: &mut StreamRng, o: &mut [f64]| o[0] = r.random_range(-0.5..0.5));
        let cfg = PipelineConfig::new(uniform_class(), 0.3, 0.1).with_runs(1).with_learner(1.0, 0.02, Some(16));
        let c = construct_candidates(&u, &cfg, Stream::new(3)).unwrap();
        assert_eq!(c.reports.len(), 1);
        assert!(c.feasible.len() <= 1);
    }
}
