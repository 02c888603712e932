//! The checkerboard family behind the sample-complexity lower bound: piecewise
//! constant densities on the unit cubes of [−T, T)^d, exact pairwise metrics,
//! and an empirical error-versus-samples experiment.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::SampleSet;
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::rng::{Stream, StreamRng};
use crate::synthetic::{estimate_tv, Bounds, DensityFn, TvMode};

/// f_z(x) = (T + z_{a(x)})/Z on cube(a) = a + [0,1)^d, a ∈ A = {−T,…,T−1}^d.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckerboardDensity {
    d: usize,
    t: u64,
    /// Row-major over A, first coordinate slowest.
    z: Vec<bool>,
    norm: u64,
    /// Cumulative cell weights T + z_a, for sampling.
    cum: Vec<u64>,
}

fn cells(d: usize, t: u64) -> Result<u64> {
    let side = 2 * t;
    (0..d)
        .try_fold(1u64, |acc, _| acc.checked_mul(side))
        .filter(|&n| n <= 1 << 26)
        .ok_or_else(|| Error::Resource(format!("(2T)^d cells with T={t}, d={d} is too many")))
}

impl CheckerboardDensity {
    pub fn new(d: usize, t: u64, z: Vec<bool>) -> Result<Self> {
        if d == 0 || t == 0 {
            return Err(Error::Parameter("need d >= 1 and T >= 1".into()));
        }
        let n = cells(d, t)?;
        if z.len() as u64 != n {
            return Err(Error::Parameter(format!("codeword has {} bits, expected {n}", z.len())));
        }
        let weight = z.iter().filter(|&&b| b).count() as u64;
        let norm = n * t + weight;
        let mut acc = 0;
        let cum = z
            .iter()
            .map(|&b| {
                acc += t + b as u64;
                acc
            })
            .collect();
        Ok(CheckerboardDensity { d, t, z, norm, cum })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cutoff(&self) -> u64 {
        self.t
    }

    pub fn codeword(&self) -> &[bool] {
        &self.z
    }

    /// Z = (2T)^d·T + weight(z).
    pub fn normalizer(&self) -> u64 {
        self.norm
    }

    /// |A| = (2T)^d.
    pub fn cell_count(&self) -> usize {
        self.z.len()
    }

    /// Row-major index of the cube containing x, if x ∈ [−T, T)^d.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let side = 2 * self.t as i64;
        let mut idx = 0usize;
        for &xi in x {
            let a = xi.floor();
            if !(a >= -(self.t as f64) && a < self.t as f64) {
                return None;
            }
            idx = idx * side as usize + (a as i64 + self.t as i64) as usize;
        }
        Some(idx)
    }

    /// Lower corner a of cube number `idx`.
    pub fn corner(&self, idx: usize, out: &mut [f64]) {
        let side = 2 * self.t as usize;
        let mut rem = idx;
        for j in (0..self.d).rev() {
            out[j] = (rem % side) as f64 - self.t as f64;
            rem /= side;
        }
    }

    /// Numerator T + z_a of the cell value (the value is this over Z).
    pub fn numerator(&self, idx: usize) -> u64 {
        self.t + self.z[idx] as u64
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.cell_of(x) {
            Some(i) => self.numerator(i) as f64 / self.norm as f64,
            None => 0.0,
        }
    }

    /// A cube drawn with probability (T + z_a)/Z, then a uniform point inside it.
    pub fn sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let u = rng.random_range(0..self.norm);
        let idx = self.cum.partition_point(|&c| c <= u);
        self.corner(idx, out);
        for v in out.iter_mut() {
            *v += rng.random::<f64>();
        }
    }

    pub fn support(&self) -> Bounds {
        let t = self.t as f64;
        Bounds::new(vec![-t; self.d], vec![t; self.d])
    }

    fn bits(&self) -> String {
        self.z.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl DensityFn for CheckerboardDensity {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, x: &[f64]) -> f64 {
        CheckerboardDensity::eval(self, x)
    }
    fn total_mass(&self) -> Option<f64> {
        Some(1.0)
    }
    fn breaks(&self, _fixed: &[f64]) -> Vec<f64> {
        let t = self.t as i64;
        (-t..=t).map(|k| k as f64).collect()
    }
}

impl Oracle for CheckerboardDensity {
    fn dim(&self) -> usize {
        self.d
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        self.sample(rng, out);
        Ok(1)
    }
}

/// T = ⌈C/ε⌉.
pub fn cutoff_for(eps: f64, c: f64) -> Result<u64> {
    if !(eps > 0.0 && c > 0.0) {
        return Err(Error::Parameter(format!("need eps > 0 and C > 0, got {eps}, {c}")));
    }
    let t = (c / eps).ceil();
    if t > 1e6 {
        return Err(Error::Resource(format!("T = {t} is too large")));
    }
    Ok(t as u64)
}

/// N members with balanced codewords (weight |A|/2) at pairwise Hamming
/// distance at least |A|/4, by rejection from uniform balanced strings.
pub fn build_family(eps: f64, d: usize, n: usize, c: f64, stream: Stream) -> Result<Vec<CheckerboardDensity>> {
    let t = cutoff_for(eps, c)?;
    if d == 0 {
        return Err(Error::Parameter("d must be at least 1".into()));
    }
    let cells = cells(d, t)? as usize;
    if cells < 4 {
        return Err(Error::Parameter(format!("|A| = {cells} is below 4; lower eps")));
    }
    if n == 0 {
        return Err(Error::Parameter("family size must be at least 1".into()));
    }
    let min_dist = cells.div_ceil(4);
    let max_draws = 10_000 * n as u64;
    let mut rng = stream.named("codewords").rng();
    let mut words: Vec<Vec<bool>> = Vec::with_capacity(n);
    let mut base: Vec<bool> = (0..cells).map(|i| i < cells / 2).collect();
    let mut draws = 0u64;
    while words.len() < n {
        if draws >= max_draws {
            return Err(Error::Resource(format!(
                "accepted only {} of {n} codewords after {draws} draws; the family size is too large for |A| = {cells}",
                words.len()
            )));
        }
        draws += 1;
        base.shuffle(&mut rng);
        if words.iter().all(|w| hamming(w, &base) >= min_dist) {
            words.push(base.clone());
        }
    }
    words.into_iter().map(|z| CheckerboardDensity::new(d, t, z)).collect()
}

fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn same_shape(u: &CheckerboardDensity, v: &CheckerboardDensity) -> Result<()> {
    if u.d != v.d || u.t != v.t || u.norm != v.norm {
        return Err(Error::Parameter(format!(
            "metrics need equal d, T and Z; got ({}, {}, {}) and ({}, {}, {})",
            u.d, u.t, u.norm, v.d, v.t, v.norm
        )));
    }
    Ok(())
}

/// ∫|f_u − f_v| = Hamming(u, v)/Z, as (numerator, denominator).
pub fn exact_tv_ratio(u: &CheckerboardDensity, v: &CheckerboardDensity) -> Result<(u64, u64)> {
    same_shape(u, v)?;
    Ok((hamming(&u.z, &v.z) as u64, u.norm))
}

pub fn exact_tv(u: &CheckerboardDensity, v: &CheckerboardDensity) -> Result<f64> {
    let (a, b) = exact_tv_ratio(u, v)?;
    Ok(a as f64 / b as f64)
}

/// KL(f_u ‖ f_v) in closed form: cells with u_a=1, v_a=0 contribute
/// ((T+1)/Z)·ln((T+1)/T), cells with u_a=0, v_a=1 contribute (T/Z)·ln(T/(T+1)).
pub fn exact_kl(u: &CheckerboardDensity, v: &CheckerboardDensity) -> Result<f64> {
    same_shape(u, v)?;
    let (mut up, mut down) = (0u64, 0u64);
    for (&a, &b) in u.z.iter().zip(&v.z) {
        match (a, b) {
            (true, false) => up += 1,
            (false, true) => down += 1,
            _ => {}
        }
    }
    let t = u.t as f64;
    let z = u.norm as f64;
    let r = ((t + 1.0) / t).ln();
    Ok(up as f64 * (t + 1.0) / z * r - down as f64 * t / z * r)
}

/// Family file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub d: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub codewords: Vec<String>,
}

pub fn family_to_json(family: &[CheckerboardDensity]) -> Result<String> {
    let first = family
        .first()
        .ok_or_else(|| Error::Parameter("empty family".into()))?;
    let file = FamilyFile {
        d: first.d,
        t: first.t,
        codewords: family.iter().map(|f| f.bits()).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn family_from_json(s: &str) -> Result<Vec<CheckerboardDensity>> {
    let file: FamilyFile = serde_json::from_str(s)?;
    file.codewords
        .iter()
        .map(|w| {
            let z = w
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Parameter(format!("codeword character {other:?}"))),
                })
                .collect::<Result<Vec<bool>>>()?;
            CheckerboardDensity::new(file.d, file.t, z)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairMetrics {
    pub i: usize,
    pub j: usize,
    pub tv: f64,
    pub kl: f64,
}

/// All pairs i < j.
pub fn pair_metrics(family: &[CheckerboardDensity]) -> Result<Vec<PairMetrics>> {
    let mut out = Vec::new();
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            out.push(PairMetrics {
                i,
                j,
                tv: exact_tv(&family[i], &family[j])?,
                kl: exact_kl(&family[i], &family[j])?,
            });
        }
    }
    Ok(out)
}

pub fn write_pairs_csv<W: Write>(rows: &[PairMetrics], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Something that turns m samples into an evaluable density.
pub trait FanoLearner: Sync {
    fn name(&self) -> String;
    fn fit(&self, samples: &SampleSet) -> Result<Box<dyn DensityFn + Send>>;
}

/// Cell frequencies on the unit cubes of [−T, T)^d.
pub struct HistogramLearner {
    pub d: usize,
    pub t: u64,
}

struct CellDensity {
    shape: CheckerboardDensity,
    values: Vec<f64>,
}

impl DensityFn for CellDensity {
    fn dim(&self) -> usize {
        self.shape.d
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.shape.cell_of(x).map_or(0.0, |i| self.values[i])
    }
    fn breaks(&self, fixed: &[f64]) -> Vec<f64> {
        self.shape.breaks(fixed)
    }
}

impl FanoLearner for HistogramLearner {
    fn name(&self) -> String {
        "histogram".into()
    }
    fn fit(&self, samples: &SampleSet) -> Result<Box<dyn DensityFn + Send>> {
        let n = cells(self.d, self.t)? as usize;
        let shape = CheckerboardDensity::new(self.d, self.t, vec![false; n])?;
        let mut values = vec![0.0; n];
        let w = 1.0 / samples.len().max(1) as f64;
        for x in samples.rows() {
            if let Some(i) = shape.cell_of(x) {
                values[i] += w;
            }
        }
        Ok(Box::new(CellDensity { shape, values }))
    }
}

/// The family member with the largest likelihood (lowest index on ties).
pub struct FamilyMle {
    pub family: Vec<CheckerboardDensity>,
}

impl FanoLearner for FamilyMle {
    fn name(&self) -> String {
        "family-mle".into()
    }
    fn fit(&self, samples: &SampleSet) -> Result<Box<dyn DensityFn + Send>> {
        let first = self
            .family
            .first()
            .ok_or_else(|| Error::Parameter("empty family".into()))?;
        // every member shares Z, so the log-likelihood ranks by Σ ln(T + z_a)
        let mut counts = vec![0u64; first.cell_count()];
        for x in samples.rows() {
            if let Some(i) = first.cell_of(x) {
                counts[i] += 1;
            }
        }
        let up = ((first.t + 1) as f64 / first.t as f64).ln();
        let score = |f: &CheckerboardDensity| -> f64 {
            f.z.iter().zip(&counts).filter(|(b, _)| **b).map(|(_, &c)| c as f64).sum::<f64>() * up
        };
        let mut best = 0;
        let mut best_score = score(first);
        for (k, f) in self.family.iter().enumerate().skip(1) {
            let s = score(f);
            if s > best_score {
                best = k;
                best_score = s;
            }
        }
        Ok(Box::new(self.family[best].clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FanoRow {
    pub m: usize,
    pub trials: usize,
    pub mean_tv: f64,
    pub stderr: f64,
}

/// For each m and trial: a uniformly random member, m draws from it, the
/// learner's fit, and ∫|fit − member| on a cell-aligned grid.
pub fn fano_experiment(
    family: &[CheckerboardDensity],
    learner: &dyn FanoLearner,
    m_values: &[usize],
    trials: usize,
    stream: Stream,
) -> Result<Vec<FanoRow>> {
    let first = family
        .first()
        .ok_or_else(|| Error::Parameter("empty family".into()))?;
    if trials == 0 || m_values.contains(&0) {
        return Err(Error::Parameter("need trials >= 1 and every m >= 1".into()));
    }
    if first.d > 3 {
        return Err(Error::Unsupported("grid TV is limited to d <= 3".into()));
    }
    let bx = first.support();
    let grid = 4 * first.t as usize;
    m_values
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let base = stream.named("m").split(mi as u64);
            let errs: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|k| {
                    let mut rng = base.split(k as u64).rng();
                    let f = &family[rng.random_range(0..family.len())];
                    let mut s = SampleSet::with_capacity(f.d, m);
                    let mut x = vec![0.0; f.d];
                    for _ in 0..m {
                        f.sample(&mut rng, &mut x);
                        s.push(&x);
                    }
                    let h = learner.fit(&s)?;
                    Ok(estimate_tv(h.as_ref(), f, &bx, TvMode::Grid(grid))?.tv)
                })
                .collect::<Result<_>>()?;
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Ok(FanoRow {
                m,
                trials,
                mean_tv: mean,
                stderr: (var / n).sqrt(),
            })
        })
        .collect()
}

pub fn write_fano_csv<W: Write>(rows: &[FanoRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{estimate_si, shift_l1};

    fn word(bits: &str) -> Vec<bool> {
        bits.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn normalizers() {
        let f = CheckerboardDensity::new(1, 2, word("1100")).unwrap();
        assert_eq!(f.normalizer(), 10);
        let fam = build_family(0.5, 1, 1, 1.0, Stream::new(1)).unwrap();
        assert_eq!((fam[0].cutoff(), fam[0].cell_count(), fam[0].normalizer()), (2, 4, 10));
        let fam = build_family(0.1, 1, 3, 1.0, Stream::new(1)).unwrap();
        assert_eq!((fam[0].cutoff(), fam[0].cell_count(), fam[0].normalizer()), (10, 20, 210));
        for f in &fam {
            let mass: f64 = (0..20).map(|i| f.numerator(i) as f64).sum::<f64>() / 210.0;
            assert!((mass - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluation_examples() {
        let f = CheckerboardDensity::new(1, 2, word("1100")).unwrap();
        assert_eq!(f.eval(&[-1.5]), 0.3);
        assert_eq!(f.eval(&[1.5]), 0.2);
        assert_eq!(f.eval(&[5.0]), 0.0);
        assert_eq!(f.eval(&[2.0]), 0.0);
        assert_eq!(f.eval(&[-2.0]), 0.3);
    }

    #[test]
    fn metric_examples() {
        let u = CheckerboardDensity::new(1, 2, word("1100")).unwrap();
        let v = CheckerboardDensity::new(1, 2, word("0011")).unwrap();
        assert_eq!(exact_tv_ratio(&u, &v).unwrap(), (4, 10));
        assert_eq!(exact_tv(&u, &u).unwrap(), 0.0);
        let w = CheckerboardDensity::new(1, 2, word("1010")).unwrap();
        assert_eq!(exact_tv(&u, &w).unwrap(), 0.2);
        let kl = exact_kl(&u, &v).unwrap();
        assert!((kl - (0.6 * 1.5f64.ln() + 0.4 * (2.0f64 / 3.0).ln())).abs() < 1e-15);
        assert!((kl - 0.08109).abs() < 1e-5);
        assert_eq!(exact_kl(&u, &u).unwrap(), 0.0);
        let other = CheckerboardDensity::new(1, 3, vec![false; 6]).unwrap();
        assert!(exact_tv(&u, &other).is_err());
    }

    #[test]
    fn tv_matches_quadrature() {
        let fam = build_family(0.25, 2, 4, 1.0, Stream::new(9)).unwrap();
        let bx = fam[0].support();
        for (a, b) in [(0, 1), (1, 2), (2, 3)] {
            let grid = estimate_tv(&fam[a], &fam[b], &bx, TvMode::Grid(64)).unwrap().tv;
            assert!((grid - exact_tv(&fam[a], &fam[b]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn family_invariants() {
        for (eps, d, n) in [(0.1, 1, 16), (0.25, 2, 20), (0.5, 2, 4)] {
            let fam = build_family(eps, d, n, 1.0, Stream::new(3)).unwrap();
            let a = fam[0].cell_count();
            let z = fam[0].normalizer();
            for f in &fam {
                assert_eq!(f.codeword().iter().filter(|&&b| b).count(), a / 2);
                assert_eq!(f.normalizer(), z);
            }
            for p in pair_metrics(&fam).unwrap() {
                assert!(hamming(&fam[p.i].z, &fam[p.j].z) >= a.div_ceil(4));
                assert!(p.tv >= (a as f64 / 4.0) / z as f64 - 1e-15);
                assert!(p.kl >= 0.0 && p.kl <= 1.0);
            }
        }
        assert_eq!(
            build_family(0.1, 1, 16, 1.0, Stream::new(3)).unwrap(),
            build_family(0.1, 1, 16, 1.0, Stream::new(3)).unwrap()
        );
        // only 6 balanced words of length 4 exist, with pairwise distances 2 or 4
        assert!(matches!(build_family(0.5, 1, 7, 1.0, Stream::new(3)), Err(Error::Resource(_))));
        assert!(matches!(build_family(1.0, 1, 1, 1.0, Stream::new(3)), Err(Error::Parameter(_))));
    }

    #[test]
    fn sampler_matches_cells() {
        let f = CheckerboardDensity::new(1, 2, word("1100")).unwrap();
        let mut rng = Stream::new(5).rng();
        let n = 200_000;
        let mut counts = [0usize; 4];
        let mut x = [0.0];
        for _ in 0..n {
            f.sample(&mut rng, &mut x);
            counts[f.cell_of(&x).unwrap()] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = f.numerator(i) as f64 / 10.0;
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }

    #[test]
    fn json_round_trip() {
        let fam = build_family(0.25, 2, 3, 1.0, Stream::new(2)).unwrap();
        let s = family_to_json(&fam).unwrap();
        assert_eq!(family_from_json(&s).unwrap(), fam);
        let mut buf = Vec::new();
        write_pairs_csv(&pair_metrics(&fam).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "i,j,tv,kl");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn shift_bounds() {
        for (eps, d) in [(0.1, 1), (0.25, 2)] {
            let f = &build_family(eps, d, 1, 1.0, Stream::new(4)).unwrap()[0];
            let bx = f.support();
            let mut rng = Stream::new(6).rng();
            let mut dirs: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let axes = dirs.len();
            for _ in 0..10 {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = crate::domain::norm(&v);
                dirs.push(v.iter().map(|x| x / n).collect());
            }
            for (k, v) in dirs.iter().enumerate() {
                let c = if k < axes { 10.0 } else { 10.0 * (d as f64).sqrt() };
                for kappa in [0.05, 0.1, 0.5] {
                    let l = shift_l1(f, &bx, v, kappa).unwrap();
                    assert!(l <= c * kappa * eps, "d={d} v={v:?} kappa={kappa}: {l}");
                }
            }
            let si = estimate_si(f, &bx, &dirs[axes], 0.1).unwrap();
            assert!(si <= 4.0 * (d as f64).sqrt(), "{si}");
        }
    }

    #[test]
    fn fano_curve_decreases() {
        let fam = build_family(0.1, 1, 16, 1.0, Stream::new(3)).unwrap();
        let min_tv = pair_metrics(&fam).unwrap().iter().map(|p| p.tv).fold(f64::INFINITY, f64::min);
        let mle = FamilyMle { family: fam.clone() };
        let ms = [1, 10, 100, 1000, 40_000];
        let rows = fano_experiment(&fam, &mle, &ms, 40, Stream::new(8)).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].mean_tv <= w[0].mean_tv + 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt());
        }
        assert!(rows.last().unwrap().mean_tv < min_tv / 2.0);
        let hist = HistogramLearner { d: 1, t: 10 };
        let rows = fano_experiment(&fam, &hist, &[10, 1000], 20, Stream::new(8)).unwrap();
        assert!(rows[1].mean_tv < rows[0].mean_tv);
    }
}
