//! Candidate hypotheses: mass estimation, exact rejection samplers, approximate
//! evaluation oracles and the Scheffé selection tournament.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{Point, SampleSet};
use crate::error::{Error, Result};
use crate::fourier::FourierHypothesis;
use crate::oracle::{draw_n, Oracle};
use crate::par;
use crate::rng::{Stream, StreamRng};
use crate::transform::{AffineFrame, PulledBack, PulledBackEval};

/// Evaluation budget above which a mass estimate is refused.
pub const MASS_EVAL_CAP: u64 = 20_000_000_000;

/// Hoeffding count N = ⌈2·(2^d·H_max/ε)²·ln(2/δ)⌉ for values in [0, H_max].
pub fn mass_sample_count(d: usize, h_max: f64, eps: f64, delta: f64) -> Result<u64> {
    if !(eps > 0.0 && delta > 0.0 && delta < 1.0 && h_max >= 0.0) {
        return Err(Error::Parameter(format!(
            "mass estimation needs eps > 0, 0 < delta < 1, H_max >= 0; got {eps}, {delta}, {h_max}"
        )));
    }
    let r = 2f64.powi(d as i32) * h_max / eps;
    let n = (2.0 * r * r * (2.0 / delta).ln()).ceil().max(1.0);
    if n > MASS_EVAL_CAP as f64 {
        return Err(Error::Resource(format!("mass estimate would need {n:e} evaluations")));
    }
    Ok(n as u64)
}

/// Ẑ = 2^d · mean of h at N uniform points of [−1,1]^d, drawn from `stream`
/// (never from the data oracle).
pub fn estimate_mass(h_scond: &FourierHypothesis, h_max: f64, eps: f64, delta: f64, stream: Stream) -> Result<f64> {
    let d = h_scond.dim();
    let n = mass_sample_count(d, h_max, eps, delta)? as usize;
    let mut total = 0.0;
    par::ordered_fold(
        par::nblocks(n),
        |b| {
            let mut rng = stream.split(b as u64).rng();
            let mut ev = h_scond.evaluator();
            let mut z = vec![0.0; d];
            let mut s = 0.0;
            for _ in par::block_range(b, n) {
                for v in z.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
                s += ev.value(&z);
            }
            Ok(s)
        },
        |_, s| {
            total += s;
            Ok(())
        },
    )?;
    Ok(2f64.powi(d as i32) * total / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Feasible,
    Discarded,
}

/// A pulled-back hypothesis with its estimated mass and sup bound.
#[derive(Clone, Debug)]
pub struct CandidateHypothesis {
    pub h: PulledBack,
    pub z_hat: f64,
    /// Sup bound of h in conditioned coordinates.
    pub h_max: f64,
    pub status: Status,
    /// Frame the hypothesis was learned in, when it came from one.
    pub frame: Option<AffineFrame>,
}

impl CandidateHypothesis {
    /// Feasible exactly when Ẑ ≥ 1/2.
    pub fn new(h: PulledBack, z_hat: f64, h_max: f64) -> Self {
        let status = if z_hat >= 0.5 { Status::Feasible } else { Status::Discarded };
        CandidateHypothesis {
            h,
            z_hat,
            h_max,
            status,
            frame: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    /// Rejection sampler for h/Z.
    pub fn sampler(&self) -> Result<CandidateSampler<'_>> {
        if !self.is_feasible() {
            return Err(Error::Parameter("cannot sample an infeasible candidate".into()));
        }
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(Error::Degenerate(format!("candidate sup bound {} is unusable", self.h_max)));
        }
        let d = self.dim();
        Ok(CandidateSampler {
            c: self,
            ev: self.h.inner.evaluator(),
            limit: 64 * (2f64.powi(d as i32) * self.h_max).ceil() as u64,
            z: vec![0.0; d],
            trials: 0,
        })
    }
}

pub struct CandidateSampler<'a> {
    c: &'a CandidateHypothesis,
    ev: crate::fourier::Evaluator<'a>,
    limit: u64,
    z: Vec<f64>,
    trials: u64,
}

impl CandidateSampler<'_> {
    /// Uniform point of [−1,1]^d × [0, H_max], kept when under the graph of h,
    /// then pulled back. Stalls after 64·⌈2^d·H_max⌉ consecutive rejections.
    pub fn draw(&mut self, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        for _ in 0..self.limit {
            for v in self.z.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let u = rng.random_range(0.0..self.c.h_max);
            self.trials += 1;
            if u <= self.ev.value(&self.z) {
                self.c.h.map.to_original(&self.z, out);
                return Ok(());
            }
        }
        Err(Error::Stalled { trials: self.limit })
    }

    /// Proposals made so far.
    pub fn trials(&self) -> u64 {
        self.trials
    }
}

/// One exact draw from h/Z.
pub fn sample_candidate(c: &CandidateHypothesis, stream: Stream) -> Result<Point> {
    let mut s = c.sampler()?;
    let mut out = vec![0.0; c.dim()];
    s.draw(&mut stream.rng(), &mut out)?;
    Point::new(out)
}

/// x ↦ h(x)/Ẑ.
pub struct EvalOracle<'a> {
    density: PulledBackEval<'a>,
    z_hat: f64,
    pub beta: f64,
}

impl EvalOracle<'_> {
    pub fn value(&mut self, x: &[f64]) -> f64 {
        self.density.eval(x) / self.z_hat
    }
}

/// Approximate evaluation oracle; `beta` is the multiplicative accuracy the
/// caller relies on (ε/32 in the tournament).
pub fn eval_oracle(c: &CandidateHypothesis, beta: f64) -> Result<EvalOracle<'_>> {
    if !c.is_feasible() {
        return Err(Error::Parameter(format!(
            "candidate with estimated mass {} is infeasible",
            c.z_hat
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    Ok(EvalOracle {
        density: c.h.density(),
        z_hat: c.z_hat,
        beta,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectParams {
    pub eps: f64,
    pub delta: f64,
    /// Multiplier in m = ⌈(c_m/ε²)·(ln M + ln(3/δ))⌉.
    pub c_m: f64,
    /// A pair is a draw when p_i − p_j ≤ draw_factor·ε.
    pub draw_factor: f64,
    /// Evaluation-oracle accuracy; ε/32 when `None`.
    pub beta: Option<f64>,
}

impl SelectParams {
    pub fn new(eps: f64, delta: f64) -> Self {
        SelectParams {
            eps,
            delta,
            c_m: 48.0,
            draw_factor: 6.0,
            beta: None,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.eps / 32.0)
    }

    pub fn draws(&self, m_candidates: usize) -> u64 {
        (self.c_m / (self.eps * self.eps) * ((m_candidates as f64).ln() + (3.0 / self.delta).ln())).ceil() as u64
    }

    fn validate(&self) -> Result<()> {
        let b = self.beta();
        if !(self.eps > 0.0 && self.delta > 0.0 && self.delta < 1.0 && self.c_m > 0.0 && self.draw_factor >= 0.0) {
            return Err(Error::Parameter(format!("invalid selection parameters {self:?}")));
        }
        if !(b > 0.0 && (1.0 + b) * (1.0 + b) <= 1.0 + self.eps / 8.0) {
            return Err(Error::Parameter(format!(
                "beta = {b} violates (1+beta)^2 <= 1 + eps/8"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    I,
    J,
    Draw,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub p_i: f64,
    pub p_j: f64,
    pub tau: f64,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionReport {
    pub winner: usize,
    /// Draws per distribution.
    pub m: u64,
    pub target_draws: u64,
    pub non_losses: Vec<usize>,
    pub pairs: Vec<PairRecord>,
}

/// Values of every candidate's evaluation oracle on one sample set.
fn evaluate_all(cands: &[CandidateHypothesis], beta: f64, pts: &SampleSet) -> Result<Vec<Vec<f64>>> {
    cands
        .par_iter()
        .map(|c| {
            let mut e = eval_oracle(c, beta)?;
            Ok(pts.rows().map(|x| e.value(x)).collect())
        })
        .collect()
}

/// Scheffé tournament over ordered pairs. For (i, j) the set W = {x : H̃_i(x) > H̃_j(x)}
/// is measured under m draws from H_i, H_j and the target; the pair is a draw
/// when p_i − p_j ≤ draw_factor·ε, otherwise the one whose mass is closer to τ wins.
/// The candidate with the most non-losses wins, lowest index on ties.
pub fn scheffe_select<O: Oracle + ?Sized>(
    candidates: &[CandidateHypothesis],
    target: &O,
    p: &SelectParams,
    stream: Stream,
) -> Result<SelectionReport> {
    p.validate()?;
    let mc = candidates.len();
    if mc == 0 {
        return Err(Error::Parameter("selection needs at least one candidate".into()));
    }
    if let Some(k) = candidates.iter().position(|c| !c.is_feasible()) {
        return Err(Error::Parameter(format!("candidate {k} is infeasible")));
    }
    if mc == 1 {
        return Ok(SelectionReport {
            winner: 0,
            m: 0,
            target_draws: 0,
            non_losses: vec![0],
            pairs: Vec::new(),
        });
    }
    let d = candidates[0].dim();
    if candidates.iter().any(|c| c.dim() != d) || target.dim() != d {
        return Err(Error::Domain("candidates and target disagree on dimension".into()));
    }
    let m = p.draws(mc);
    let beta = p.beta();
    let (tpts, target_draws) = draw_n(target, m as usize, stream.named("target"))?;
    let cpts: Vec<SampleSet> = candidates
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut s = c.sampler()?;
            let mut rng = stream.named("candidate").split(k as u64).rng();
            let mut out = SampleSet::with_capacity(d, m as usize);
            let mut x = vec![0.0; d];
            for _ in 0..m {
                s.draw(&mut rng, &mut x)?;
                out.push(&x);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    // vals_t[k][q]: oracle k at target draw q; vals_c[s][k][q]: oracle k at draw q of candidate s
    let vals_t = evaluate_all(candidates, beta, &tpts)?;
    let vals_c: Vec<Vec<Vec<f64>>> = cpts
        .iter()
        .map(|s| evaluate_all(candidates, beta, s))
        .collect::<Result<_>>()?;
    let frac = |v: &[Vec<f64>], i: usize, j: usize| {
        v[i].iter().zip(&v[j]).filter(|(a, b)| a > b).count() as f64 / m as f64
    };
    let mut pairs = Vec::with_capacity(mc * (mc - 1));
    let mut non_losses = vec![0usize; mc];
    for i in 0..mc {
        for j in 0..mc {
            if i == j {
                continue;
            }
            let p_i = frac(&vals_c[i], i, j);
            let p_j = frac(&vals_c[j], i, j);
            let tau = frac(&vals_t, i, j);
            let outcome = if p_i - p_j <= p.draw_factor * p.eps {
                Outcome::Draw
            } else if (p_i - tau).abs() < (p_j - tau).abs() {
                Outcome::I
            } else {
                Outcome::J
            };
            match outcome {
                Outcome::I => non_losses[i] += 1,
                Outcome::J => non_losses[j] += 1,
                Outcome::Draw => {
                    non_losses[i] += 1;
                    non_losses[j] += 1;
                }
            }
            pairs.push(PairRecord {
                i,
                j,
                p_i,
                p_j,
                tau,
                outcome,
            });
        }
    }
    let best = *non_losses.iter().max().expect("nonempty");
    let winner = non_losses.iter().position(|&v| v == best).expect("max exists");
    Ok(SelectionReport {
        winner,
        m,
        target_draws,
        non_losses,
        pairs,
    })
}
