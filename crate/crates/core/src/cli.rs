//! The `fdens` command line: one subcommand per capability, each writing its
//! artifacts plus a manifest that is enough to rerun it.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::domain::{ClassParams, SampleSet, TailBound};
use crate::error::{Error, Result};
use crate::fourier::FourierHypothesis;
use crate::json::{f17s, unwrap17, F17};
use crate::learn_bounded::{learn_bounded, BoundedLearnerParams};
use crate::logconcave::{estimate_json, learn_logconcave, LogConcaveConfig};
use crate::lowerbound::{
    build_family, fano_experiment, family_to_json, pair_metrics, write_fano_csv, write_pairs_csv, FamilyMle,
    FanoLearner, HistogramLearner,
};
use crate::oracle::{Oracle, Resample};
use crate::pipeline::{learn, PipelineConfig, Schedule};
use crate::rng::{Stream, StreamRng};
use crate::synthetic::{contaminate, registry, tv_hypothesis_to_truth, zoo, GroundTruth, TvMode};
use crate::transform::{pull_back_hypothesis, AffineMap, PulledBack};

/// Environment variable holding the worker count.
pub const THREADS_VAR: &str = "FDENS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "fdens", version, about = "Learn shift-invariant densities from samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bounded-support learner on [−1,1]^d (no frame, no selection).
    LearnBounded(LearnBoundedArgs),
    /// Full learner: frames, bounded learner per frame, mass estimates, tournament.
    Learn(LearnArgs),
    /// Log-concave learner: covariance rescaling, then the full learner.
    Logconcave(LogconcaveArgs),
    /// Checkerboard lower-bound family, exact pair metrics, error-vs-samples curve.
    Lowerbound(LowerboundArgs),
    /// ∫|h − f| between a hypothesis file and a registry distribution.
    EvalTv(EvalTvArgs),
    /// List the synthetic zoo, or draw samples from one member.
    Zoo(ZooArgs),
    /// Samples and error of the bounded learner across ε (d = 1).
    Bench(BenchArgs),
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn open_unit(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a number in (0, 1), got {s:?}")),
    }
}

fn accuracy(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 0.5 => Ok(v),
        _ => Err(format!("expected a number in (0, 1/2], got {s:?}")),
    }
}

fn noise_level(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        _ => Err(format!("expected a number in [0, 1), got {s:?}")),
    }
}

fn dimension(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if (1..=8).contains(&v) => Ok(v),
        _ => Err(format!("expected a dimension in 1..=8, got {s:?}")),
    }
}

fn count(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

fn json_object(s: &str) -> std::result::Result<Value, String> {
    match serde_json::from_str::<Value>(s) {
        Ok(v @ Value::Object(_)) => Ok(v),
        _ => Err(format!("expected a JSON object, got {s:?}")),
    }
}

/// `exponential:β`, `gaussian:β` or `bounded:R`.
fn tail_spec(s: &str) -> std::result::Result<TailBound, String> {
    let (kind, v) = s
        .split_once(':')
        .ok_or_else(|| format!("expected KIND:VALUE, got {s:?}"))?;
    let v = positive(v)?;
    match kind {
        "exponential" => Ok(TailBound::exponential(v)),
        "gaussian" => Ok(TailBound::gaussian(v)),
        "bounded" => Ok(TailBound::bounded(v)),
        _ => Err(format!("unknown tail kind {kind:?} (exponential, gaussian, bounded)")),
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Seed of the root random stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Manifest path (default: next to the main output).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Source {
    /// Registry name of the target distribution.
    #[arg(long, conflicts_with_all = ["dist_file", "samples"])]
    dist: Option<String>,
    /// Registry parameters as a JSON object.
    #[arg(long, value_parser = json_object, default_value = "{}")]
    params: Value,
    /// Distribution spec file: {name, d, params} or a serialized ground truth.
    #[arg(long)]
    dist_file: Option<PathBuf>,
    /// CSV of samples, drawn from uniformly with replacement.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Fraction of draws replaced by the noise distribution.
    #[arg(long, value_parser = noise_level, default_value_t = 0.0)]
    noise: f64,
    /// Registry name of the noise distribution.
    #[arg(long, requires = "noise")]
    noise_dist: Option<String>,
    #[arg(long, value_parser = json_object, default_value = "{}")]
    noise_params: Value,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Knobs {
    /// Multiplier on the cutoff T.
    #[arg(long, value_parser = positive, default_value_t = 1.0)]
    c_t: f64,
    /// Multiplier on the sample count S.
    #[arg(long, value_parser = positive, default_value_t = 1.0)]
    c_s: f64,
    /// Ceiling on T.
    #[arg(long, value_parser = count)]
    cutoff_cap: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct LearnBoundedArgs {
    #[arg(long, value_parser = dimension)]
    dim: usize,
    #[arg(long, value_parser = accuracy)]
    eps: f64,
    #[arg(long, value_parser = positive)]
    kappa: f64,
    #[arg(long, value_parser = open_unit, default_value_t = 0.1)]
    delta: f64,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    knobs: Knobs,
    /// Hypothesis JSON output.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct LearnArgs {
    #[arg(long, value_parser = dimension)]
    dim: usize,
    #[arg(long, value_parser = accuracy)]
    eps: f64,
    #[arg(long, value_parser = open_unit, default_value_t = 0.1)]
    delta: f64,
    /// Class constant c (default: the registry member's declared class).
    #[arg(long, value_parser = positive)]
    class_c: Option<f64>,
    /// Tail bound as KIND:VALUE (default: the declared class).
    #[arg(long, value_parser = tail_spec)]
    tail: Option<TailBound>,
    /// Exactly this many frames instead of the desk schedule.
    #[arg(long, value_parser = count)]
    runs: Option<usize>,
    /// Full schedule constant a in ⌈e^{a·I_g}·ln(1/δ)⌉.
    #[arg(long, value_parser = positive, conflicts_with = "runs")]
    schedule_a: Option<f64>,
    /// Additive accuracy of the mass estimates (default ε).
    #[arg(long, value_parser = positive)]
    mass_eps: Option<f64>,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out: PathBuf,
    /// Run report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct LogconcaveArgs {
    #[arg(long, value_parser = dimension)]
    dim: usize,
    #[arg(long, value_parser = accuracy)]
    eps: f64,
    #[arg(long, value_parser = open_unit, default_value_t = 0.1)]
    delta: f64,
    /// Rescale attempts (default ⌈log₂(1/δ)⌉).
    #[arg(long, value_parser = count)]
    attempts: Option<usize>,
    /// Frames per attempt (default: the desk schedule).
    #[arg(long, value_parser = count)]
    runs: Option<usize>,
    #[arg(long, value_parser = positive)]
    mass_eps: Option<f64>,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct LowerboundArgs {
    #[arg(long, value_parser = dimension)]
    dim: usize,
    #[arg(long, value_parser = open_unit)]
    eps: f64,
    /// Family size N.
    #[arg(long, value_parser = count)]
    n: usize,
    /// C in T = ⌈C/ε⌉.
    #[arg(long, value_parser = positive, default_value_t = 1.0)]
    c: f64,
    /// Pair metrics CSV (i, j, tv, kl).
    #[arg(long)]
    report: PathBuf,
    /// Family JSON output.
    #[arg(long)]
    family: Option<PathBuf>,
    /// Error-vs-samples CSV output.
    #[arg(long)]
    fano: Option<PathBuf>,
    /// Sample sizes for the error-vs-samples experiment.
    #[arg(long, value_delimiter = ',', value_parser = count, default_value = "1,10,100,1000,10000")]
    m: Vec<usize>,
    #[arg(long, value_parser = count, default_value_t = 40)]
    trials: usize,
    /// family-mle or histogram.
    #[arg(long, default_value = "family-mle")]
    learner: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct EvalTvArgs {
    /// Hypothesis JSON (plain, or a log-concave file with a whitening block).
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long, value_parser = json_object, default_value = "{}")]
    params: Value,
    #[arg(long)]
    dist_file: Option<PathBuf>,
    /// Dimension for --dist (default: the hypothesis dimension).
    #[arg(long, value_parser = dimension)]
    dim: Option<usize>,
    /// Grid points per axis.
    #[arg(long, value_parser = count, conflicts_with = "mc")]
    grid: Option<usize>,
    /// Monte-Carlo points instead of a grid.
    #[arg(long, value_parser = count)]
    mc: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct ZooArgs {
    /// Zoo member to sample from (by its zoo name).
    #[arg(long, requires = "sample")]
    name: Option<String>,
    /// Number of draws.
    #[arg(long, value_parser = count, requires = "out")]
    sample: Option<usize>,
    /// Sample CSV (with --sample) or zoo listing JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', value_parser = accuracy, default_value = "0.5,0.4,0.3,0.25")]
    eps: Vec<f64>,
    #[arg(long, value_parser = open_unit, default_value_t = 0.1)]
    delta: f64,
    #[command(flatten)]
    knobs: Knobs,
    /// CSV output (eps, T, samples, tv, wall_s).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: Value,
    seed: u64,
    version: &'static str,
    inputs: Vec<String>,
    outputs: Vec<String>,
    wall_time_s: f64,
    total_samples: u64,
}

/// Output paths and sample count of one finished command.
struct Done {
    outputs: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    samples: u64,
}

enum Target {
    Truth(GroundTruth),
    Data(SampleSet),
}

impl Oracle for Target {
    fn dim(&self) -> usize {
        match self {
            Target::Truth(t) => t.dim(),
            Target::Data(s) => s.dim(),
        }
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        match self {
            Target::Truth(t) => t.draw(rng, out),
            Target::Data(s) => Resample { samples: s }.draw(rng, out),
        }
    }
}

fn load_truth(name: Option<&str>, params: &Value, file: Option<&Path>, d: usize) -> Result<GroundTruth> {
    let g = match (name, file) {
        (Some(n), _) => registry(n, d, params)?,
        (None, Some(p)) => GroundTruth::from_spec(&serde_json::from_str(&fs::read_to_string(p)?)?)?,
        (None, None) => return Err(Error::Parameter("a distribution is required (--dist or --dist-file)".into())),
    };
    if g.dim() != d {
        return Err(Error::Parameter(format!("distribution has dimension {}, expected {d}", g.dim())));
    }
    Ok(g)
}

impl Source {
    fn inputs(&self) -> Vec<PathBuf> {
        self.dist_file.iter().chain(&self.samples).cloned().collect()
    }

    /// The clean truth, when the target is synthetic.
    fn truth(&self, d: usize) -> Result<Option<GroundTruth>> {
        if self.samples.is_some() {
            return Ok(None);
        }
        load_truth(self.dist.as_deref(), &self.params, self.dist_file.as_deref(), d).map(Some)
    }

    fn target(&self, d: usize) -> Result<Target> {
        if let Some(p) = &self.samples {
            if self.noise > 0.0 {
                return Err(Error::Parameter("--noise applies to synthetic targets only".into()));
            }
            let s = SampleSet::load(p)?;
            if s.dim() != d {
                return Err(Error::Parameter(format!("sample file has dimension {}, expected {d}", s.dim())));
            }
            s.require_nonempty()?;
            return Ok(Target::Data(s));
        }
        let f = self.truth(d)?.expect("synthetic source");
        if self.noise == 0.0 {
            return Ok(Target::Truth(f));
        }
        let name = self
            .noise_dist
            .as_deref()
            .ok_or_else(|| Error::Parameter("--noise needs --noise-dist".into()))?;
        let q = registry(name, d, &self.noise_params)?;
        Ok(Target::Truth(contaminate(&f, &q, self.noise)?))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cmd_learn_bounded(a: &LearnBoundedArgs) -> Result<Done> {
    let target = a.source.target(a.dim)?;
    let p = BoundedLearnerParams::new(a.dim, a.eps, a.kappa, a.delta)
        .with_constants(a.knobs.c_t, a.knobs.c_s)
        .with_cutoff_cap(a.knobs.cutoff_cap);
    let out = learn_bounded(&target, &p, Stream::new(a.common.seed))?;
    write(&a.out, &out.hypothesis.to_json(None)?)?;
    eprintln!(
        "T = {} (formula {}), S = {}, {} raw draws",
        out.plan.t, out.plan.t_formula, out.plan.s, out.raw_draws
    );
    Ok(Done {
        outputs: vec![a.out.clone()],
        inputs: a.source.inputs(),
        samples: out.raw_draws,
    })
}

fn class_for(source: &Source, d: usize, c: Option<f64>, tail: Option<&TailBound>) -> Result<ClassParams> {
    let declared = source.truth(d)?.and_then(|f| f.class);
    let c = c.or(declared.as_ref().map(|k| k.c));
    let tail = tail.cloned().or(declared.map(|k| k.tail));
    match (c, tail) {
        (Some(c), Some(tail)) => ClassParams::new(c, d, tail),
        _ => Err(Error::Parameter(
            "the target declares no class; pass --class-c and --tail".into(),
        )),
    }
}

fn cmd_learn(a: &LearnArgs) -> Result<Done> {
    let target = a.source.target(a.dim)?;
    let class = class_for(&a.source, a.dim, a.class_c, a.tail.as_ref())?;
    let mut cfg = PipelineConfig::new(class, a.eps, a.delta).with_learner(a.knobs.c_t, a.knobs.c_s, a.knobs.cutoff_cap);
    if let Some(r) = a.runs {
        cfg.schedule = Schedule::Fixed { runs: r };
    }
    if let Some(x) = a.schedule_a {
        cfg.schedule = Schedule::Full { a: x };
    }
    cfg.mass_eps = a.mass_eps;
    let out = learn(&target, &cfg, Stream::new(a.common.seed))?;
    write(&a.out, &out.hypothesis_json()?)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(r) = &a.report {
        let mut report = serde_json::to_value(&out.report)?;
        // wall time is kept in the manifest so reports rerun byte-identically
        report.as_object_mut().map(|o| o.remove("wall_time_s"));
        write(r, &pretty(&report)?)?;
        outputs.push(r.clone());
    }
    eprintln!(
        "{} runs, winner run {}, {} samples",
        out.report.runs, out.report.winner, out.report.total_samples
    );
    Ok(Done {
        outputs,
        inputs: a.source.inputs(),
        samples: out.report.total_samples,
    })
}

/// Hypothesis file with the whitening that maps it back to original coordinates.
pub fn logconcave_json(hyp_json: &str, mu: &[f64], unwhitener: &[f64]) -> Result<String> {
    let raw = serde_json::value::RawValue::from_string(hyp_json.to_string())?;
    Ok(serde_json::to_string(&json!({
        "hypothesis": raw,
        "whitening": {"mu": f17s(mu), "unwhitener": f17s(unwhitener)},
    }))?)
}

/// Reads a hypothesis file (plain or log-concave) into a density on R^d.
pub fn load_hypothesis(text: &str) -> Result<PulledBack> {
    let v: Value = serde_json::from_str(text)?;
    let (inner, extra) = match v.get("hypothesis") {
        Some(h) => (h.to_string(), v.get("whitening")),
        None => (text.to_string(), None),
    };
    let (h, frame) = FourierHypothesis::from_json(&inner)?;
    let d = h.dim();
    let mut pb = match frame {
        Some(f) => pull_back_hypothesis(h, &f),
        None => {
            let mut id = vec![0.0; d * d];
            for i in 0..d {
                id[i * d + i] = 1.0;
            }
            PulledBack {
                inner: h,
                map: AffineMap::new(id, vec![0.0; d])?,
            }
        }
    };
    if let Some(w) = extra {
        let get = |k: &str| -> Result<Vec<f64>> {
            let f: Vec<F17> = serde_json::from_value(w.get(k).cloned().unwrap_or(Value::Null))?;
            Ok(unwrap17(&f))
        };
        pb.map = pb.map.then(&get("unwhitener")?, &get("mu")?)?;
    }
    Ok(pb)
}

fn cmd_logconcave(a: &LogconcaveArgs) -> Result<Done> {
    let target = a.source.target(a.dim)?;
    let mut cfg = LogConcaveConfig::new(a.dim, a.eps, a.delta);
    cfg.attempts = a.attempts;
    cfg.runs = a.runs;
    cfg.mass_eps = a.mass_eps;
    cfg.c_t = a.knobs.c_t;
    cfg.c_s = a.knobs.c_s;
    cfg.cutoff_cap = a.knobs.cutoff_cap;
    let out = learn_logconcave(&target, &cfg, Stream::new(a.common.seed))?;
    let hyp = out.hypothesis.h.inner.to_json(out.hypothesis.frame.as_ref())?;
    write(&a.out, &logconcave_json(&hyp, &out.estimate.mu, &out.estimate.unwhitener)?)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(r) = &a.report {
        let report = json!({
            "config": cfg,
            "winner_attempt": out.winner,
            "estimate": estimate_json(&out.estimate),
            "attempts": out.attempts,
            "selection": out.selection,
            "total_samples": out.total_samples,
        });
        write(r, &pretty(&report)?)?;
        outputs.push(r.clone());
    }
    eprintln!(
        "{} attempts, winner attempt {}, {} samples",
        out.attempts.len(),
        out.winner,
        out.total_samples
    );
    Ok(Done {
        outputs,
        inputs: a.source.inputs(),
        samples: out.total_samples,
    })
}

fn cmd_lowerbound(a: &LowerboundArgs) -> Result<Done> {
    let stream = Stream::new(a.common.seed);
    let fam = build_family(a.eps, a.dim, a.n, a.c, stream.named("family"))?;
    let pairs = pair_metrics(&fam)?;
    let mut buf = Vec::new();
    write_pairs_csv(&pairs, &mut buf)?;
    fs::write(&a.report, buf)?;
    let mut outputs = vec![a.report.clone()];
    if let Some(p) = &a.family {
        write(p, &(family_to_json(&fam)? + "\n"))?;
        outputs.push(p.clone());
    }
    let mut samples = 0;
    if let Some(p) = &a.fano {
        let learner: Box<dyn FanoLearner> = match a.learner.as_str() {
            "family-mle" => Box::new(FamilyMle { family: fam.clone() }),
            "histogram" => Box::new(HistogramLearner {
                d: a.dim,
                t: fam[0].cutoff(),
            }),
            other => return Err(Error::Parameter(format!("unknown learner {other:?} (family-mle, histogram)"))),
        };
        let rows = fano_experiment(&fam, learner.as_ref(), &a.m, a.trials, stream.named("fano"))?;
        let mut buf = Vec::new();
        write_fano_csv(&rows, &mut buf)?;
        fs::write(p, buf)?;
        outputs.push(p.clone());
        samples = a.m.iter().map(|&m| (m * a.trials) as u64).sum();
    }
    let min_tv = pairs.iter().map(|p| p.tv).fold(f64::INFINITY, f64::min);
    eprintln!(
        "T = {}, |A| = {}, Z = {}, {} pairs, min tv {min_tv:.6}",
        fam[0].cutoff(),
        fam[0].cell_count(),
        fam[0].normalizer(),
        pairs.len()
    );
    Ok(Done {
        outputs,
        inputs: Vec::new(),
        samples,
    })
}

fn cmd_eval_tv(a: &EvalTvArgs) -> Result<Done> {
    let h = load_hypothesis(&fs::read_to_string(&a.hyp)?)?;
    let d = a.dim.unwrap_or(h.dim());
    let f = load_truth(a.dist.as_deref(), &a.params, a.dist_file.as_deref(), d)?;
    let mode = match a.mc {
        Some(points) => TvMode::MonteCarlo {
            points,
            seed: a.common.seed,
        },
        None => TvMode::Grid(a.grid.unwrap_or(crate::synthetic::default_grid(d))),
    };
    let tv = tv_hypothesis_to_truth(&h, &f, mode)?;
    println!("{}", tv.tv);
    let mut outputs = Vec::new();
    if let Some(r) = &a.report {
        let report = json!({
            "tv": F17(tv.tv),
            "stderr": F17(tv.stderr),
            "hypothesis_mass": F17(tv.mass_a),
            "truth": f,
        });
        write(r, &pretty(&report)?)?;
        outputs.push(r.clone());
    }
    let mut inputs = vec![a.hyp.clone()];
    inputs.extend(a.dist_file.clone());
    Ok(Done {
        outputs,
        inputs,
        samples: a.mc.map_or(0, |n| n as u64),
    })
}

fn cmd_zoo(a: &ZooArgs) -> Result<Done> {
    let members = zoo();
    match (&a.name, a.sample) {
        (Some(name), Some(n)) => {
            let f = members
                .iter()
                .find(|m| &m.name == name)
                .ok_or_else(|| Error::Parameter(format!("no zoo member named {name:?}")))?;
            let (s, raw) = crate::oracle::draw_n(f, n, Stream::new(a.common.seed))?;
            let path = a.out.as_ref().expect("clap requires --out");
            s.write_csv(fs::File::create(path)?)?;
            Ok(Done {
                outputs: vec![path.clone()],
                inputs: Vec::new(),
                samples: raw,
            })
        }
        _ => {
            let listing = pretty(&members)?;
            match &a.out {
                Some(p) => write(p, &listing)?,
                None => print!("{listing}"),
            }
            Ok(Done {
                outputs: a.out.iter().cloned().collect(),
                inputs: Vec::new(),
                samples: 0,
            })
        }
    }
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn cmd_bench(a: &BenchArgs) -> Result<Done> {
    let f = registry("uniform-interval", 1, &json!({"lo": -0.5, "hi": 0.5}))?;
    let stream = Stream::new(a.common.seed);
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["eps", "T", "samples", "tv", "wall_s"])?;
    let (mut inv, mut samples) = (Vec::new(), Vec::new());
    let mut total = 0;
    for (k, &eps) in a.eps.iter().enumerate() {
        let p = BoundedLearnerParams::new(1, eps, eps / 4.0, a.delta)
            .with_constants(a.knobs.c_t, a.knobs.c_s)
            .with_cutoff_cap(a.knobs.cutoff_cap);
        let start = Instant::now();
        let out = learn_bounded(&f, &p, stream.split(k as u64))?;
        let wall = start.elapsed().as_secs_f64();
        let h = PulledBack {
            inner: out.hypothesis,
            map: AffineMap::new(vec![1.0], vec![0.0])?,
        };
        let tv = tv_hypothesis_to_truth(&h, &f, TvMode::Grid(1 << 14))?;
        wr.write_record([
            eps.to_string(),
            out.plan.t.to_string(),
            out.plan.s.to_string(),
            tv.tv.to_string(),
            format!("{wall:.3}"),
        ])?;
        inv.push(1.0 / eps);
        samples.push(out.plan.s as f64);
        total += out.raw_draws;
    }
    fs::write(&a.out, wr.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
    if a.eps.len() >= 2 {
        println!("log-log slope of samples vs 1/eps: {:.3}", loglog_slope(&inv, &samples));
    }
    Ok(Done {
        outputs: vec![a.out.clone()],
        inputs: Vec::new(),
        samples: total,
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Parameter(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

fn execute(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let start = Instant::now();
    let (name, config, common, done) = match &cli.command {
        Command::LearnBounded(a) => ("learn-bounded", serde_json::to_value(a)?, &a.common, cmd_learn_bounded(a)?),
        Command::Learn(a) => ("learn", serde_json::to_value(a)?, &a.common, cmd_learn(a)?),
        Command::Logconcave(a) => ("logconcave", serde_json::to_value(a)?, &a.common, cmd_logconcave(a)?),
        Command::Lowerbound(a) => ("lowerbound", serde_json::to_value(a)?, &a.common, cmd_lowerbound(a)?),
        Command::EvalTv(a) => ("eval-tv", serde_json::to_value(a)?, &a.common, cmd_eval_tv(a)?),
        Command::Zoo(a) => ("zoo", serde_json::to_value(a)?, &a.common, cmd_zoo(a)?),
        Command::Bench(a) => ("bench", serde_json::to_value(a)?, &a.common, cmd_bench(a)?),
    };
    let path = common.manifest.clone().unwrap_or_else(|| match done.outputs.first() {
        Some(p) => with_suffix(p, ".manifest.json"),
        None => PathBuf::from(format!("fdens-{name}.manifest.json")),
    });
    let show = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect();
    let manifest = Manifest {
        subcommand: name,
        config,
        seed: common.seed,
        version: env!("CARGO_PKG_VERSION"),
        inputs: show(&done.inputs),
        outputs: show(&done.outputs),
        wall_time_s: start.elapsed().as_secs_f64(),
        total_samples: done.samples,
    };
    write(&path, &pretty(&manifest)?)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 1 on a learning failure, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::PipelineFailure { diagnostics, .. } = &e {
                for d in diagnostics {
                    eprintln!("  {d}");
                }
            }
            exit_code(&e)
        }
    }
}
