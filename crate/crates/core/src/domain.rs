//! Points, sample sets, tail-bound descriptors and distribution-class parameters.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// A point of R^d with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("a point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate in {coords:?}")));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// An ordered list of points of equal dimension, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
    /// Id of the randomness stream that produced the points, when known.
    pub provenance: Option<u64>,
}

impl SampleSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SampleSet {
            dim,
            data: Vec::new(),
            provenance: None,
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        let mut s = SampleSet::new(dim);
        s.data.reserve(n * dim);
        s
    }

    /// Builds a sample set from row-major data. Rejects ragged or non-finite input.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Domain(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coordinate in sample set".into()));
        }
        Ok(SampleSet {
            dim,
            data,
            provenance: None,
        })
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Domain("empty sample set".into()))?;
        let dim = first.dim();
        let mut s = SampleSet::with_capacity(dim, points.len());
        for p in points {
            if p.dim() != dim {
                return Err(Error::Domain(format!(
                    "mixed dimensions {} and {} in sample set",
                    dim,
                    p.dim()
                )));
            }
            s.data.extend_from_slice(p.coords());
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.data.extend_from_slice(x);
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::Domain("estimators need a nonempty sample set".into()))
        } else {
            Ok(())
        }
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        self.require_nonempty()?;
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        Ok(m)
    }

    /// Reads the CSV sample format: one point per row, optional `x1,...,xd` header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim = 0usize;
        let mut data = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if line == 0 && rec.iter().all(|f| f.starts_with('x')) {
                continue;
            }
            if dim == 0 {
                dim = rec.len();
            } else if rec.len() != dim {
                return Err(Error::Domain(format!(
                    "row {} has {} columns, expected {dim}",
                    line + 1,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Domain(format!("row {}: cannot parse {field:?}", line + 1)))?;
                data.push(v);
            }
        }
        if dim == 0 {
            return Err(Error::Domain("no samples in CSV input".into()));
        }
        SampleSet::from_flat(dim, data)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        w.write_record(&header)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        SampleSet::read_csv(std::fs::File::open(path)?)
    }
}

/// A nonincreasing function on a log-spaced grid, linear in between.
/// Below the grid it evaluates to 1, above it to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub t: Vec<f64>,
    pub g: Vec<f64>,
}

impl TailTable {
    pub fn new(t: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t.len() != g.len() {
            return Err(Error::Parameter("tail table needs at least two (t, g) pairs".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) || t[0] <= 0.0 {
            return Err(Error::Parameter("tail table abscissae must be positive and increasing".into()));
        }
        if g.windows(2).any(|w| w[1] > w[0]) || g.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("tail table values must be nonincreasing in [0, 1]".into()));
        }
        Ok(TailTable { t, g })
    }

    /// Tabulates `f` on `n` log-spaced points of [t_min, t_max], clamped to [0, 1].
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        let (a, b) = (t_min.ln(), t_max.ln());
        let t: Vec<f64> = (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect();
        let mut g: Vec<f64> = t.iter().map(|&x| f(x).clamp(0.0, 1.0)).collect();
        for i in 1..g.len() {
            g[i] = g[i].min(g[i - 1]);
        }
        TailTable::new(t, g)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.t[0] {
            return 1.0;
        }
        let last = self.t.len() - 1;
        if x > self.t[last] {
            return 0.0;
        }
        let i = self.t.partition_point(|&v| v <= x).clamp(1, last);
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let w = (x - t0) / (t1 - t0);
        self.g[i - 1] + w * (self.g[i] - self.g[i - 1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    /// g(t) = min(1, e^{1 - t/β}).
    Exponential { beta: f64 },
    /// g(t) = e^{-(t/β)²}.
    Gaussian { beta: f64 },
    /// g(t) = 1 for t < R, 0 afterwards.
    Bounded { radius: f64 },
    Table(TailTable),
}

/// Tail function g with Pr[‖x − μ‖ > t] ≤ g(t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub kind: TailKind,
    /// When set, g is replaced by max(g, 1[t < 1/10]).
    #[serde(default)]
    pub floor: bool,
}

const FLOOR_RADIUS: f64 = 0.1;

impl TailBound {
    pub fn exponential(beta: f64) -> Self {
        assert!(beta > 0.0);
        TailBound {
            kind: TailKind::Exponential { beta },
            floor: false,
        }
    }

    pub fn gaussian(beta: f64) -> Self {
        assert!(beta > 0.0);
        TailBound {
            kind: TailKind::Gaussian { beta },
            floor: false,
        }
    }

    pub fn bounded(radius: f64) -> Self {
        assert!(radius > 0.0);
        TailBound {
            kind: TailKind::Bounded { radius },
            floor: false,
        }
    }

    pub fn table(table: TailTable) -> Self {
        TailBound {
            kind: TailKind::Table(table),
            floor: false,
        }
    }

    fn eval_raw(&self, t: f64) -> f64 {
        match &self.kind {
            TailKind::Exponential { beta } => (1.0 - t / beta).exp().min(1.0),
            TailKind::Gaussian { beta } => (-(t / beta).powi(2)).exp(),
            TailKind::Bounded { radius } => {
                if t < *radius {
                    1.0
                } else {
                    0.0
                }
            }
            TailKind::Table(tab) => tab.eval(t),
        }
    }

    /// g(t).
    pub fn eval(&self, t: f64) -> f64 {
        let g = self.eval_raw(t);
        if self.floor && t < FLOOR_RADIUS {
            1.0
        } else {
            g
        }
    }

    /// inf{t ≥ 0 : g(t) ≤ ε}.
    pub fn inverse(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("tail level must lie in (0, 1), got {eps}")));
        }
        let mut t = match &self.kind {
            TailKind::Exponential { beta } => beta * (1.0 + (1.0 / eps).ln()),
            TailKind::Gaussian { beta } => beta * (1.0 / eps).ln().sqrt(),
            TailKind::Bounded { radius } => *radius,
            TailKind::Table(tab) => {
                let (mut lo, mut hi) = (0.0, *tab.t.last().unwrap());
                if tab.eval(lo) <= eps {
                    return Ok(if self.floor { FLOOR_RADIUS } else { 0.0 });
                }
                while hi - lo > 1e-10 {
                    let mid = 0.5 * (lo + hi);
                    if tab.eval(mid) <= eps {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        };
        // closed forms can land one ulp short of the level set
        while self.eval_raw(t) > eps {
            t = t.next_up();
        }
        if self.floor {
            t = t.max(FLOOR_RADIUS);
        }
        Ok(t)
    }

    /// I_g = ∫_0^∞ g(√z) dz.
    pub fn integral(&self) -> Result<f64> {
        let raw = match &self.kind {
            TailKind::Exponential { beta } => 5.0 * beta * beta,
            TailKind::Gaussian { beta } => beta * beta,
            TailKind::Bounded { radius } => radius * radius,
            TailKind::Table(_) => {
                let v = quad::integrate_half_line(|z| self.eval_raw(z.sqrt()), 1e-8)?;
                if self.floor {
                    return Ok(v + self.floor_excess()?);
                }
                return Ok(v);
            }
        };
        if self.floor {
            Ok(raw + self.floor_excess()?)
        } else {
            Ok(raw)
        }
    }

    // ∫_0^{0.01} (1 − g(√z)) dz: mass added by the floor.
    fn floor_excess(&self) -> Result<f64> {
        let zmax = FLOOR_RADIUS * FLOOR_RADIUS;
        match &self.kind {
            TailKind::Exponential { beta } if *beta >= FLOOR_RADIUS => Ok(0.0),
            TailKind::Gaussian { beta } => Ok(zmax - beta * beta * (1.0 - (-zmax / (beta * beta)).exp())),
            TailKind::Bounded { radius } => Ok((zmax - radius * radius).max(0.0)),
            _ => quad::integrate(|z| 1.0 - self.eval_raw(z.sqrt()), 0.0, zmax, 1e-14, 1e-10),
        }
    }

    /// min{r : g(r) ≤ 1/2}.
    pub fn half_radius(&self) -> f64 {
        self.inverse(0.5).expect("1/2 is a valid level")
    }

    /// Returns g unchanged when min{r : g(r) ≤ 1/2} ≥ 1/10, and max(g, 1[t < 1/10]) otherwise.
    pub fn enforce_floor(&self) -> TailBound {
        if self.floor || self.half_radius() >= FLOOR_RADIUS {
            return self.clone();
        }
        TailBound {
            kind: self.kind.clone(),
            floor: true,
        }
    }
}

/// Parameters of the class of densities with shift-invariance at most `c` and tail bound `tail`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    /// Per-unit-shift L1 rate.
    pub c: f64,
    pub d: usize,
    pub tail: TailBound,
}

impl ClassParams {
    pub fn new(c: f64, d: usize, tail: TailBound) -> Result<Self> {
        if !(c > 0.0) || d == 0 {
            return Err(Error::Parameter(format!("need c > 0 and d >= 1, got c={c}, d={d}")));
        }
        Ok(ClassParams { c, d, tail })
    }
}
