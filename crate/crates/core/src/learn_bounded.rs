//! Learner for densities supported in B(1/2): mollify by adding a draw of
//! b_{d,γ} to every sample, estimate the coefficients on the Low set, invert and clip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{CoefficientSums, FourierHypothesis, FrequencySet, DEFAULT_LOW_CAP};
use crate::mollifier::MollifierParams;
use crate::oracle::Oracle;
use crate::par;
use crate::rng::Stream;

/// Largest sample count the learner will attempt by default.
pub const DEFAULT_SAMPLE_CAP: u64 = 100_000_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedLearnerParams {
    pub d: usize,
    pub eps: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Multiplier on the cutoff T.
    pub c_t: f64,
    /// Multiplier on the sample count S.
    pub c_s: f64,
    /// Optional ceiling on T; η and S are then derived from the capped T.
    pub cutoff_cap: Option<usize>,
    pub low_cap: u64,
    pub sample_cap: u64,
}

impl BoundedLearnerParams {
    pub fn new(d: usize, eps: f64, kappa: f64, delta: f64) -> Self {
        BoundedLearnerParams {
            d,
            eps,
            kappa,
            delta,
            c_t: 1.0,
            c_s: 1.0,
            cutoff_cap: None,
            low_cap: DEFAULT_LOW_CAP,
            sample_cap: DEFAULT_SAMPLE_CAP,
        }
    }

    pub fn with_constants(mut self, c_t: f64, c_s: f64) -> Self {
        self.c_t = c_t;
        self.c_s = c_s;
        self
    }

    pub fn with_cutoff_cap(mut self, cap: Option<usize>) -> Self {
        self.cutoff_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.d >= 1
            && self.kappa > 0.0
            && self.kappa < self.eps
            && self.eps <= 0.5
            && self.delta > 0.0
            && self.delta < 1.0
            && self.c_t > 0.0
            && self.c_s > 0.0
            && self.cutoff_cap != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "need 0 < kappa < eps <= 1/2, 0 < delta < 1 and positive constants; got d={}, eps={}, kappa={}, delta={}, c_T={}, c_S={}",
                self.d, self.eps, self.kappa, self.delta, self.c_t, self.c_s
            )))
        }
    }
}

/// Quantities derived from the learner parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerPlan {
    pub gamma: f64,
    /// Cutoff actually used.
    pub t: usize,
    /// Cutoff before any cap.
    pub t_formula: usize,
    pub eta: f64,
    pub s: u64,
    pub low_size: u64,
}

/// γ = κ/√d, T, η² = (2T+1)^{−d}·ε²/8 and S = ⌈c_S·(4/η²)·ln(4·(2T+1)^d/δ)⌉.
pub fn derive_parameters(p: &BoundedLearnerParams) -> Result<LearnerPlan> {
    p.validate()?;
    let d = p.d as f64;
    let gamma = p.kappa / d.sqrt();
    let raw = p.c_t
        * ((4.0 * d * d / gamma) * (d / gamma).ln().powi(2) + (1.0 / gamma) * (8.0 / p.eps).ln().powi(2));
    let t_formula = raw.ceil();
    if !(t_formula < 1e15) {
        return Err(Error::Resource(format!("cutoff T = {t_formula:e} is not representable")));
    }
    let t_formula = t_formula as usize;
    let t = p.cutoff_cap.map_or(t_formula, |c| c.min(t_formula));
    let low = FrequencySet::build_capped(p.d, t, p.low_cap)?;
    let n = low.len() as f64;
    let eta2 = p.eps * p.eps / 8.0 / n;
    let s = (p.c_s * (4.0 / eta2) * (4.0 * n / p.delta).ln()).ceil();
    if !(s <= p.sample_cap as f64) {
        return Err(Error::Resource(format!(
            "sample count S = {s:e} exceeds the cap {} (T = {t})",
            p.sample_cap
        )));
    }
    Ok(LearnerPlan {
        gamma,
        t,
        t_formula,
        eta: eta2.sqrt(),
        s: s as u64,
        low_size: low.len() as u64,
    })
}

/// (2T+1)^d / 2^d.
pub fn h_max_bound(t: usize, d: usize) -> f64 {
    ((2 * t + 1) as f64 / 2.0).powi(d as i32)
}

/// min{(2T+1)^d/2^d, 2^{−d}·Σ|û|}; both bound sup h.
pub fn h_max_tight(h: &FourierHypothesis) -> f64 {
    h_max_bound(h.freqs().cutoff(), h.dim()).min(h.abs_sum_bound())
}

#[derive(Clone, Debug)]
pub struct BoundedOutcome {
    pub hypothesis: FourierHypothesis,
    pub plan: LearnerPlan,
    /// Raw draws consumed from the oracle (after any rejection inside it).
    pub raw_draws: u64,
}

/// Runs the learner on S mollified draws. Block `b` of `BLOCK` samples uses
/// stream `stream.split(b)` for both the oracle draw and the mollifier draw.
pub fn learn_bounded<O: Oracle + ?Sized>(oracle: &O, p: &BoundedLearnerParams, stream: Stream) -> Result<BoundedOutcome> {
    let plan = derive_parameters(p)?;
    if oracle.dim() != p.d {
        return Err(Error::Parameter(format!(
            "oracle dimension {} does not match d = {}",
            oracle.dim(),
            p.d
        )));
    }
    let freqs = FrequencySet::build_capped(p.d, plan.t, p.low_cap)?;
    let moll = MollifierParams::new(p.d, plan.gamma.min(0.5))?;
    let d = p.d;
    let s = plan.s as usize;
    let mut total = CoefficientSums::new(freqs);
    let mut raw_draws = 0u64;
    par::ordered_fold(
        par::nblocks(s),
        |b| {
            let rg = par::block_range(b, s);
            let mut rng = stream.split(b as u64).rng();
            let mut pts = vec![0.0; rg.len() * d];
            let mut noise = vec![0.0; d];
            let mut raw = 0;
            for q in pts.chunks_exact_mut(d) {
                raw += oracle.draw(&mut rng, q)?;
                moll.sample_into(&mut rng, &mut noise);
                for (a, e) in q.iter_mut().zip(&noise) {
                    *a += e;
                }
                if q.iter().any(|v| !(v.abs() <= 1.0)) {
                    return Err(Error::Invariant(format!(
                        "mollified sample {q:?} left [-1,1]^d; the target is not supported in B(1/2)"
                    )));
                }
            }
            let mut acc = CoefficientSums::new(freqs);
            acc.add_points(&pts);
            Ok((acc, raw))
        },
        |_, (acc, raw)| {
            total.merge(&acc);
            raw_draws += raw;
            Ok(())
        },
    )?;
    Ok(BoundedOutcome {
        hypothesis: total.finish(true)?,
        plan,
        raw_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;
    use crate::rng::StreamRng;
    use rand::Rng;

    #[test]
    fn derived_cutoffs() {
        let p = BoundedLearnerParams::new(1, 0.2, 0.05, 0.1);
        let plan = derive_parameters(&p).unwrap();
        assert_eq!(plan.gamma, 0.05);
        assert_eq!(plan.t, 991);
        assert!((plan.eta - (0.04f64 / 8.0 / 1983.0).sqrt()).abs() < 1e-15);
        assert!((plan.eta - 1.588e-3).abs() < 1e-6);
        let q = BoundedLearnerParams::new(1, 0.3, 0.075, 0.1);
        assert_eq!(derive_parameters(&q).unwrap().t, 502);
    }

    #[test]
    fn sample_count_formula() {
        let q = BoundedLearnerParams::new(1, 0.3, 0.075, 0.1);
        let plan = derive_parameters(&q).unwrap();
        let n = 1005.0f64;
        let eta2 = 0.09 / 8.0 / n;
        assert_eq!(plan.s, ((4.0 / eta2) * (4.0 * n / 0.1).ln()).ceil() as u64);
    }

    #[test]
    fn cutoff_cap_recomputes_eta_and_s() {
        let p = BoundedLearnerParams::new(2, 0.4, 0.1, 0.1).with_cutoff_cap(Some(10));
        let plan = derive_parameters(&p).unwrap();
        assert_eq!(plan.t, 10);
        assert!(plan.t_formula > 10);
        assert_eq!(plan.low_size, 441);
    }

    #[test]
    fn h_max_values() {
        assert_eq!(h_max_bound(502, 1), 502.5);
        assert_eq!(h_max_bound(10, 2), 110.25);
        assert_eq!(h_max_bound(0, 1), 0.5);
    }

    #[test]
    fn parameter_preconditions() {
        assert!(derive_parameters(&BoundedLearnerParams::new(1, 0.6, 0.1, 0.1)).is_err());
        assert!(derive_parameters(&BoundedLearnerParams::new(1, 0.3, 0.3, 0.1)).is_err());
        assert!(derive_parameters(&BoundedLearnerParams::new(1, 0.3, 0.1, 1.0)).is_err());
        let huge = BoundedLearnerParams::new(3, 0.1, 0.01, 0.1);
        assert!(matches!(derive_parameters(&huge), Err(Error::Resource(_))));
    }

    #[test]
    fn support_violation_is_an_invariant_error() {
        let wide = FnOracle::new(1, |r: &mut StreamRng, o: &mut [f64]| o[0] = r.random_range(-1.0..1.0));
        let p = BoundedLearnerParams::new(1, 0.3, 0.1, 0.1).with_cutoff_cap(Some(4)).with_constants(1.0, 0.01);
        assert!(matches!(learn_bounded(&wide, &p, Stream::new(0)), Err(Error::Invariant(_))));
    }

    #[test]
    fn small_run_is_deterministic_and_nonnegative() {
        let u = FnOracle::new(1, |r: &mut StreamRng, o: &mut [f64]| o[0] = r.random_range(-0.5..0.5));
        let p = BoundedLearnerParams::new(1, 0.3, 0.075, 0.1).with_cutoff_cap(Some(20)).with_constants(1.0, 0.05);
        let a = learn_bounded(&u, &p, Stream::new(4)).unwrap();
        let b = learn_bounded(&u, &p, Stream::new(4)).unwrap();
        assert_eq!(a.hypothesis, b.hypothesis);
        assert_eq!(a.raw_draws, a.plan.s);
        for i in 0..=1000 {
            let z = -1.0 + i as f64 / 500.0;
            assert!(a.hypothesis.evaluate(&[z]).unwrap() >= 0.0);
        }
    }
}
