//! Log-concave targets: covariance rescaling to near-isotropy, the
//! nearly-isotropic class parameters, and the unimodal shift-integral bound.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{ClassParams, SampleSet, TailBound};
use crate::error::{Error, Result};
use crate::json::{f17s, F17};
use crate::oracle::{draw_n, Counted, Oracle};
use crate::pipeline::{learn, PipelineConfig, Schedule};
use crate::quad;
use crate::rng::{Stream, StreamRng};
use crate::select::{scheffe_select, CandidateHypothesis, SelectParams, SelectionReport};

/// Empirical mean and covariance with a whitening matrix W (W·Σ̃·Wᵀ = I).
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub mu: Vec<f64>,
    /// Σ̃, row-major.
    pub sigma: Vec<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// W = Λ^{-1/2}·Vᵀ, row-major.
    pub whitener: Vec<f64>,
    /// W⁻¹ = V·Λ^{1/2}, row-major.
    pub unwhitener: Vec<f64>,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// y = W(x − μ̂).
    pub fn whiten(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            y[i] = (0..d).map(|j| self.whitener[i * d + j] * (x[j] - self.mu[j])).sum();
        }
    }

    /// x = W⁻¹y + μ̂.
    pub fn unwhiten(&self, y: &[f64], x: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            x[i] = self.mu[i] + (0..d).map(|j| self.unwhitener[i * d + j] * y[j]).sum::<f64>();
        }
    }

    /// vᵀΣ̃v / vᵀΣv for a reference covariance Σ.
    pub fn ratio(&self, v: &[f64], sigma: &[f64]) -> f64 {
        quad_form(&self.sigma, v) / quad_form(sigma, v)
    }
}

fn quad_form(m: &[f64], v: &[f64]) -> f64 {
    let d = v.len();
    (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| v[i] * m[i * d + j] * v[j])
        .sum()
}

/// M = max(200, ⌈c_r·d·ln³(d+2)⌉).
pub fn rescale_sample_count(d: usize, c_r: f64) -> usize {
    let df = d as f64;
    ((c_r * df * (df + 2.0).ln().powi(3)).ceil() as usize).max(200)
}

/// Empirical mean, empirical covariance (1/M normalization) and its eigen-whitener.
/// Eigenpairs are ordered by descending eigenvalue, each eigenvector signed so
/// its first nonzero component is positive.
pub fn rescale(samples: &SampleSet) -> Result<CovarianceEstimate> {
    samples.require_nonempty()?;
    let d = samples.dim();
    let mu = samples.mean()?;
    let n = samples.len() as f64;
    let mut sigma = vec![0.0; d * d];
    for x in samples.rows() {
        for i in 0..d {
            for j in 0..d {
                sigma[i * d + j] += (x[i] - mu[i]) * (x[j] - mu[j]);
            }
        }
    }
    for v in sigma.iter_mut() {
        *v /= n;
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &sigma));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lam: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let (lmax, lmin) = (lam[0], lam[d - 1]);
    if !(lmin > 1e-12 * lmax && lmax > 0.0) {
        return Err(Error::Degenerate(format!(
            "empirical covariance is numerically singular (eigenvalues {lmax:e} .. {lmin:e})"
        )));
    }
    // columns of V in the chosen order, sign-normalized
    let mut v = vec![0.0; d * d];
    for (c, &k) in order.iter().enumerate() {
        let col: Vec<f64> = (0..d).map(|r| eig.eigenvectors[(r, k)]).collect();
        let s = if col.iter().find(|x| x.abs() > 1e-300).is_some_and(|&x| x < 0.0) { -1.0 } else { 1.0 };
        for r in 0..d {
            v[r * d + c] = s * col[r];
        }
    }
    let mut w = vec![0.0; d * d];
    let mut w_inv = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            w[i * d + j] = v[j * d + i] / lam[i].sqrt();
            w_inv[i * d + j] = v[i * d + j] * lam[j].sqrt();
        }
    }
    Ok(CovarianceEstimate {
        mu,
        sigma,
        eigenvalues: lam,
        whitener: w,
        unwhitener: w_inv,
    })
}

/// Draws from f mapped through y = W(x − μ̂).
pub struct Whitened<'a, O: ?Sized> {
    pub inner: &'a O,
    pub est: &'a CovarianceEstimate,
}

impl<O: Oracle + ?Sized> Oracle for Whitened<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        let mut x = vec![0.0; out.len()];
        let k = self.inner.draw(rng, &mut x)?;
        self.est.whiten(&x, out);
        Ok(k)
    }
}

/// g_LC(t) = min(1, e^{1 − t/(2√d)}).
pub fn tail_lc(d: usize) -> TailBound {
    TailBound::exponential(2.0 * (d as f64).sqrt())
}

/// c_LC(d) = 16·C^d·√d for a C-nearly-isotropic density.
pub fn c_lc(d: usize, c_iso: f64) -> f64 {
    16.0 * c_iso.powi(d as i32) * (d as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogConcaveConfig {
    pub d: usize,
    pub eps: f64,
    pub delta: f64,
    /// Rescale sample constant.
    pub c_r: f64,
    /// Rescale attempts; ⌈log₂(1/δ)⌉ when `None`.
    pub attempts: Option<usize>,
    /// Near-isotropy factor C.
    pub c_iso: f64,
    /// Overrides c_LC(d).
    pub c_class: Option<f64>,
    /// Candidate runs per attempt; desk schedule when `None`.
    pub runs: Option<usize>,
    pub c_t: f64,
    pub c_s: f64,
    pub cutoff_cap: Option<usize>,
    pub mass_eps: Option<f64>,
}

impl LogConcaveConfig {
    pub fn new(d: usize, eps: f64, delta: f64) -> Self {
        LogConcaveConfig {
            d,
            eps,
            delta,
            c_r: 50.0,
            attempts: None,
            c_iso: 2.0,
            c_class: None,
            runs: None,
            c_t: 1.0,
            c_s: 1.0,
            cutoff_cap: None,
            mass_eps: None,
        }
    }

    pub fn attempts(&self) -> usize {
        self.attempts.unwrap_or_else(|| (1.0 / self.delta).log2().ceil().max(1.0) as usize)
    }

    pub fn class(&self) -> Result<ClassParams> {
        ClassParams::new(self.c_class.unwrap_or(c_lc(self.d, self.c_iso)), self.d, tail_lc(self.d))
    }

    /// Pipeline settings for one whitened attempt.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut p = PipelineConfig::new(self.class()?, self.eps, self.delta).with_learner(
            self.c_t,
            self.c_s,
            self.cutoff_cap,
        );
        if let Some(r) = self.runs {
            p.schedule = Schedule::Fixed { runs: r };
        }
        p.mass_eps = self.mass_eps;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 3 {
            return Err(Error::Unsupported(format!(
                "log-concave learning is limited to d <= 3, got {}",
                self.d
            )));
        }
        if !(self.c_r > 0.0 && self.c_iso >= 1.0) || self.attempts == Some(0) {
            return Err(Error::Parameter("invalid rescale constants".into()));
        }
        self.pipeline()?.validate()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttemptReport {
    pub attempt: usize,
    pub mu: Option<Vec<F17>>,
    /// Row-major whitening matrix.
    pub whitener: Option<Vec<F17>>,
    pub eigenvalues: Option<Vec<F17>>,
    /// Run index of the pipeline winner inside this attempt.
    pub pipeline_winner: Option<usize>,
    pub samples_used: u64,
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct LogConcaveOutcome {
    /// Winner in original coordinates.
    pub hypothesis: CandidateHypothesis,
    /// Attempt index of the winner.
    pub winner: usize,
    pub estimate: CovarianceEstimate,
    pub attempts: Vec<AttemptReport>,
    pub selection: SelectionReport,
    pub total_samples: u64,
}

struct Attempt {
    found: Option<(CandidateHypothesis, CovarianceEstimate)>,
    report: AttemptReport,
}

fn attempt<O: Oracle + ?Sized>(oracle: &O, cfg: &LogConcaveConfig, k: usize, stream: Stream) -> Result<Attempt> {
    let counted = Counted::new(oracle);
    let m = rescale_sample_count(cfg.d, cfg.c_r);
    let (pts, _) = draw_n(&counted, m, stream.named("rescale"))?;
    let mut report = AttemptReport {
        attempt: k,
        mu: None,
        whitener: None,
        eigenvalues: None,
        pipeline_winner: None,
        samples_used: 0,
        note: None,
    };
    let est = match rescale(&pts) {
        Ok(e) => e,
        Err(Error::Degenerate(msg)) => {
            report.samples_used = counted.count();
            report.note = Some(msg);
            return Ok(Attempt { found: None, report });
        }
        Err(e) => return Err(e),
    };
    report.mu = Some(f17s(&est.mu));
    report.whitener = Some(f17s(&est.whitener));
    report.eigenvalues = Some(f17s(&est.eigenvalues));
    let white = Whitened {
        inner: &counted,
        est: &est,
    };
    let out = match learn(&white, &cfg.pipeline()?, stream.named("pipeline")) {
        Ok(o) => o,
        Err(Error::PipelineFailure { message, .. }) => {
            report.samples_used = counted.count();
            report.note = Some(message);
            return Ok(Attempt { found: None, report });
        }
        Err(e) => return Err(e),
    };
    report.samples_used = counted.count();
    report.pipeline_winner = Some(out.report.winner);
    let mut c = out.hypothesis;
    c.h.map = c.h.map.then(&est.unwhitener, &est.mu)?;
    Ok(Attempt {
        found: Some((c, est)),
        report,
    })
}

/// Independent rescale attempts, each whitening the oracle and running the
/// pipeline with (c_LC, g_LC); winners are mapped back (Jacobian included)
/// and a final tournament on the original oracle picks one.
pub fn learn_logconcave<O: Oracle + ?Sized>(oracle: &O, cfg: &LogConcaveConfig, stream: Stream) -> Result<LogConcaveOutcome> {
    cfg.validate()?;
    if oracle.dim() != cfg.d {
        return Err(Error::Parameter(format!(
            "oracle dimension {} does not match d = {}",
            oracle.dim(),
            cfg.d
        )));
    }
    let r = cfg.attempts();
    let base = stream.named("attempt");
    let results: Vec<Attempt> = (0..r)
        .into_par_iter()
        .map(|k| attempt(oracle, cfg, k, base.split(k as u64)))
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(r);
    let mut found = Vec::new();
    let mut owners = Vec::new();
    let mut total = 0;
    for a in results {
        total += a.report.samples_used;
        if let Some(f) = a.found {
            owners.push(a.report.attempt);
            found.push(f);
        }
        reports.push(a.report);
    }
    if found.is_empty() {
        return Err(Error::PipelineFailure {
            message: format!("all {r} rescale attempts failed"),
            diagnostics: reports
                .iter()
                .map(|a| format!("attempt {}: {}", a.attempt, a.note.as_deref().unwrap_or("no candidate")))
                .collect(),
        });
    }
    let cands: Vec<CandidateHypothesis> = found.iter().map(|f| f.0.clone()).collect();
    let sel = scheffe_select(&cands, oracle, &SelectParams::new(cfg.eps, cfg.delta), stream.named("final"))?;
    total += sel.target_draws;
    let (hypothesis, estimate) = found.swap_remove(sel.winner);
    Ok(LogConcaveOutcome {
        hypothesis,
        winner: owners[sel.winner],
        estimate,
        attempts: reports,
        selection: sel,
        total_samples: total,
    })
}

/// (∫|ℓ(t) − ℓ(t+h)| dt, 3h·max ℓ) for a unimodal ℓ supported in [lo, hi]
/// with jumps or kinks at `breaks`.
pub fn shift_integral_check<F: Fn(f64) -> f64>(
    l: F,
    l_max: f64,
    h: f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
) -> Result<(f64, f64)> {
    if !(h >= 0.0) || !(hi > lo) {
        return Err(Error::Parameter(format!("need h >= 0 and lo < hi, got h={h}, [{lo}, {hi}]")));
    }
    if h == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut br = breaks.to_vec();
    br.extend(breaks.iter().map(|b| b - h));
    let lhs = quad::integrate_with_breaks(|t| (l(t) - l(t + h)).abs(), lo - h, hi, &br, 1e-12)?;
    Ok((lhs, 3.0 * h * l_max))
}

/// Row-major JSON view of an estimate.
pub fn estimate_json(e: &CovarianceEstimate) -> serde_json::Value {
    serde_json::json!({
        "mu": f17s(&e.mu),
        "sigma": f17s(&e.sigma),
        "eigenvalues": f17s(&e.eigenvalues),
        "whitener": f17s(&e.whitener),
    })
}
