use super::output::{floats, indexed, write_json, Csv, Field, Sink};
use crate::diffusion::{ddpm_sample, gaussian_variance_recurrence, DiffusionSchedule, ExactPancakeOracle, GaussianOracle, PerturbedOracle, ScoreOracle, TruncatedOracle};
use crate::distinguish::{advantage, default_truncation, quadrature_delta, run_experiment, DistinguisherConfig, Truth};
use crate::divergence::{bounds_report_with, QuadSpec, ReportOptions};
use crate::error::{Error, Result};
use crate::estimate::{default_beta, estimate_direction, EstimatorConfig, NetMode};
use crate::gauss1d::{cdf_smoothed, density_smoothed, LikelihoodRatio, SmoothedDGParams};
use crate::hermite::{default_degree, integral_degree_bound, rounded_degree_bound, AlphaTable};
use crate::pancakes::{default_direction, random_direction, PancakeParams};
use crate::seeding::{self, domain};
use crate::stats::{histogram_tv, ks_critical, ks_statistic, q_cdf, sample_q, MeanEstimate};
use clap::Args;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

fn need<T>(v: Option<T>, default: T) -> T {
    v.unwrap_or(default)
}

fn parse_direction(spec: Option<&str>, d: usize) -> Result<Array1<f64>> {
    let Some(spec) = spec else { return Ok(default_direction(d)) };
    let v: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::config(format!("direction entry {t:?}: {e}"))))
        .collect::<Result<_>>()?;
    if v.len() != d {
        return Err(Error::config(format!("direction has {} entries, dim is {d}", v.len())));
    }
    let u = Array1::from(v);
    let norm = u.dot(&u).sqrt();
    if !(norm > 0.0) {
        return Err(Error::config("direction must be nonzero"));
    }
    Ok(u / norm)
}

fn positive_dim(d: usize) -> Result<usize> {
    if d == 0 {
        Err(Error::config("dim must be >= 1"))
    } else {
        Ok(d)
    }
}

// ---------------------------------------------------------------- sample

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden direction as comma-separated entries (normalised); default (-1,1,0,...)/√2.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// Grid points of the density profile.
    #[arg(long)]
    pub profile_points: Option<usize>,
    /// Output CSV, or - for stdout.
    #[arg(long)]
    pub out: Option<String>,
    /// Density profile CSV; default `<out stem>.profile.csv`, stderr when --out is -.
    #[arg(long)]
    pub profile: Option<String>,
}

#[derive(Debug, Serialize)]
struct SampleConfig {
    gamma: f64,
    sigma: f64,
    dim: usize,
    n: usize,
    seed: u64,
    direction: Vec<f64>,
    profile_points: usize,
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let dim = positive_dim(need(a.dim, 2))?;
    let u = parse_direction(a.direction.as_deref(), dim)?;
    let cfg = SampleConfig {
        gamma: need(a.gamma, 6.0),
        sigma: need(a.sigma, 0.25),
        dim,
        n: need(a.n, 10_000),
        seed: need(a.seed, 0),
        direction: u.to_vec(),
        profile_points: need(a.profile_points, 801).max(2),
    };
    let p = PancakeParams::new(cfg.gamma, cfg.sigma, u)?;
    let mut rng = seeding::stream(cfg.seed, &[domain::SAMPLE]);
    let xs = p.sample(cfg.n, &mut rng)?;

    let sink = Sink::parse(a.out.as_deref().unwrap_or("-"));
    let mut csv = Csv::create(&sink, "sample", &cfg, &indexed("x", dim))?;
    for row in xs.rows() {
        csv.row(&floats(row.iter().copied()).collect::<Vec<_>>())?;
    }
    csv.finish()?;

    // Density of ⟨x,u⟩ against the Gaussian reference, on [-2, 2].
    let mut prof = Csv::create(
        &sink.sidecar(a.profile.as_deref(), "profile.csv"),
        "sample",
        &cfg,
        &["z".into(), "density".into(), "gaussian".into()],
    )?;
    let line = p.line();
    let m = cfg.profile_points;
    for i in 0..m {
        let z = -2.0 + 4.0 * i as f64 / (m - 1) as f64;
        let dens = if cfg.sigma > 0.0 { density_smoothed(z, &line)? } else { f64::NAN };
        prof.row(&[Field::F(z), if dens.is_nan() { Field::Empty } else { Field::F(dens) }, Field::F((-std::f64::consts::PI * z * z).exp())])?;
    }
    prof.finish()
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub zmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub zmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Serialize)]
struct ScoreConfig {
    gamma: f64,
    sigma: f64,
    zmin: f64,
    zmax: f64,
    points: usize,
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let cfg = ScoreConfig {
        gamma: need(a.gamma, 6.0),
        sigma: need(a.sigma, 0.25),
        zmin: need(a.zmin, -2.0),
        zmax: need(a.zmax, 2.0),
        points: need(a.points, 2001).max(2),
    };
    if !(cfg.zmax > cfg.zmin) {
        return Err(Error::config("zmax must exceed zmin"));
    }
    let lr = LikelihoodRatio::new(SmoothedDGParams::new(cfg.gamma, cfg.sigma)?)?;
    let sink = Sink::parse(a.out.as_deref().unwrap_or("-"));
    let cols = ["z", "log_ratio", "score_ratio", "curvature_ratio", "density"].map(String::from);
    let mut csv = Csv::create(&sink, "score", &cfg, &cols)?;
    for i in 0..cfg.points {
        let z = cfg.zmin + (cfg.zmax - cfg.zmin) * i as f64 / (cfg.points - 1) as f64;
        let d = lr.derivatives(z);
        let density = lr.density(z);
        csv.row(&[Field::F(z), Field::F(d.log_ratio), Field::F(d.score), Field::F(d.t2_over_t), Field::F(density)])?;
    }
    csv.finish()
}

// ---------------------------------------------------------------- diffuse

/// `exact | gaussian | perturbed:EPS[:BASE] | truncate:M[:BASE]`
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum OracleSpec {
    Exact,
    Gaussian,
    Perturbed { eps: f64, base: Box<OracleSpec> },
    Truncate { m: f64, base: Box<OracleSpec> },
}

impl OracleSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (spec, None),
        };
        let wrapped = |rest: Option<&str>| -> Result<(f64, Box<OracleSpec>)> {
            let rest = rest.ok_or_else(|| Error::config(format!("oracle `{head}` needs a value")))?;
            let (v, base) = match rest.split_once(':') {
                Some((v, b)) => (v, OracleSpec::parse(b)?),
                None => (rest, OracleSpec::Exact),
            };
            let v = v.parse::<f64>().map_err(|e| Error::config(format!("oracle value {v:?}: {e}")))?;
            Ok((v, Box::new(base)))
        };
        match head {
            "exact" if rest.is_none() => Ok(OracleSpec::Exact),
            "gaussian" if rest.is_none() => Ok(OracleSpec::Gaussian),
            "perturbed" => wrapped(rest).map(|(eps, base)| OracleSpec::Perturbed { eps, base }),
            "truncate" => wrapped(rest).map(|(m, base)| OracleSpec::Truncate { m, base }),
            _ => Err(Error::config(format!("unknown oracle {spec:?}"))),
        }
    }

    /// The innermost oracle.
    pub fn base(&self) -> &OracleSpec {
        match self {
            OracleSpec::Perturbed { base, .. } | OracleSpec::Truncate { base, .. } => base.base(),
            other => other,
        }
    }

    pub fn build(&self, p: &PancakeParams, sched: DiffusionSchedule, seed: u64) -> Result<Box<dyn ScoreOracle>> {
        Ok(match self {
            OracleSpec::Exact => Box::new(ExactPancakeOracle::new(p, sched)?),
            OracleSpec::Gaussian => Box::new(GaussianOracle::new(p.dim(), sched)),
            OracleSpec::Perturbed { eps, base } => Box::new(PerturbedOracle::new(base.build(p, sched, seed)?, *eps, seed)?),
            OracleSpec::Truncate { m, base } => Box::new(TruncatedOracle::new(base.build(p, sched, seed)?, *m)?),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Total diffusion time.
    #[arg(long = "T")]
    pub total_time: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// exact | gaussian | perturbed:EPS[:BASE] | truncate:M[:BASE]
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// Summary JSON; default `<out stem>.summary.json`, stderr when --out is -.
    #[arg(long)]
    pub summary: Option<String>,
}

#[derive(Debug, Serialize)]
struct DiffuseConfig {
    gamma: f64,
    sigma: f64,
    dim: usize,
    total_time: f64,
    steps: usize,
    oracle: OracleSpec,
    runs: usize,
    seed: u64,
    direction: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct DiffuseSummary {
    oracle: String,
    variance: Vec<MeanEstimate>,
    /// Exact-Gaussian prediction of the per-coordinate variance.
    gaussian_recurrence_variance: Option<f64>,
    projected_ks: Option<f64>,
    ks_critical_1pct: Option<f64>,
    projected_histogram_tv: Option<f64>,
}

pub fn diffuse(a: DiffuseArgs) -> Result<()> {
    let dim = positive_dim(need(a.dim, 2))?;
    let u = parse_direction(a.direction.as_deref(), dim)?;
    let cfg = DiffuseConfig {
        gamma: need(a.gamma, 4.0),
        sigma: need(a.sigma, 0.1),
        dim,
        total_time: need(a.total_time, 4.0),
        steps: need(a.steps, 1000),
        oracle: OracleSpec::parse(a.oracle.as_deref().unwrap_or("exact"))?,
        runs: need(a.runs, 1000),
        seed: need(a.seed, 0),
        direction: u.to_vec(),
    };
    if cfg.runs < 2 {
        return Err(Error::config("runs must be >= 2"));
    }
    let sched = DiffusionSchedule::new(cfg.total_time, cfg.steps)?;
    let p = PancakeParams::new(cfg.gamma, cfg.sigma, u)?;
    let oracle = cfg.oracle.build(&p, sched, cfg.seed)?;
    let ys = ddpm_sample(oracle.as_ref(), cfg.runs, cfg.seed)?;

    let sink = Sink::parse(a.out.as_deref().unwrap_or("-"));
    let mut cols = vec!["run_id".to_string()];
    cols.extend(indexed("coord", dim));
    let mut csv = Csv::create(&sink, "diffuse", &cfg, &cols)?;
    for (r, row) in ys.rows().into_iter().enumerate() {
        let mut f = vec![Field::I(r as u64)];
        f.extend(floats(row.iter().copied()));
        csv.row(&f)?;
    }
    csv.finish()?;

    let summary = diffuse_summary(&cfg, &p, oracle.as_ref(), &ys, &sched)?;
    write_json(&sink.sidecar(a.summary.as_deref(), "summary.json"), "diffuse", &cfg, &summary)
}

fn diffuse_summary(cfg: &DiffuseConfig, p: &PancakeParams, oracle: &dyn ScoreOracle, ys: &Array2<f64>, sched: &DiffusionSchedule) -> Result<DiffuseSummary> {
    let variance = ys
        .columns()
        .into_iter()
        .map(|c| {
            let sq: Vec<f64> = c.iter().map(|v| v * v).collect();
            MeanEstimate::from_slice(&sq)
        })
        .collect();
    let plain = matches!(cfg.oracle, OracleSpec::Exact | OracleSpec::Gaussian);
    let gaussian_recurrence_variance = (cfg.oracle == OracleSpec::Gaussian)
        .then(|| gaussian_variance_recurrence(sched.step(), sched.steps()) / (2.0 * std::f64::consts::PI));
    let (mut ks, mut crit, mut tv) = (None, None, None);
    if plain {
        let proj: Vec<f64> = ys.rows().into_iter().map(|r| r.dot(&p.direction())).collect();
        if cfg.oracle == OracleSpec::Exact && cfg.sigma > 0.0 {
            let line = p.line();
            ks = Some(ks_statistic(&proj, |z| cdf_smoothed(z, &line)));
            tv = Some(histogram_tv(&proj, |z| cdf_smoothed(z, &line), -2.0, 2.0, 200));
        } else if cfg.oracle == OracleSpec::Gaussian {
            ks = Some(ks_statistic(&proj, q_cdf));
        }
        crit = ks.map(|_| ks_critical(proj.len(), 0.01));
    }
    Ok(DiffuseSummary {
        oracle: oracle.describe(),
        variance,
        gaussian_recurrence_variance,
        projected_ks: ks,
        ks_critical_1pct: crit,
        projected_histogram_tv: tv,
    })
}

// ---------------------------------------------------------------- distinguish

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistinguishArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Queries per step.
    #[arg(long)]
    pub ell: Option<usize>,
    /// Truncation level: auto (8(√d + 1/σ²)) or a value.
    #[arg(long = "M")]
    pub truncation: Option<String>,
    /// Threshold: auto (half the population Δ of the pancake oracle) or a value.
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long = "T")]
    pub total_time: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-trial CSV, or - for stdout.
    #[arg(long)]
    pub out: Option<String>,
    /// JSON report; default `<out stem>.report.json`, stderr when --out is -.
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Serialize)]
struct DistinguishConfig {
    gamma: f64,
    sigma: f64,
    dim: usize,
    trials: usize,
    population_delta: f64,
    test: DistinguisherConfig,
}

fn auto_or(v: Option<&str>, auto: impl FnOnce() -> Result<f64>, what: &str) -> Result<f64> {
    match v {
        None | Some("auto") => auto(),
        Some(s) => s.parse::<f64>().map_err(|e| Error::config(format!("{what} {s:?}: {e}"))),
    }
}

pub fn distinguish(a: DistinguishArgs) -> Result<()> {
    let gamma = need(a.gamma, 4.0);
    let sigma = need(a.sigma, 0.05);
    let dim = positive_dim(need(a.dim, 16))?;
    let schedule = DiffusionSchedule::new(need(a.total_time, 1.0), need(a.steps, 100))?;
    let p = PancakeParams::new(gamma, sigma, default_direction(dim))?;
    let population_delta = quadrature_delta(&p, &schedule)?;
    let test = DistinguisherConfig {
        ell: need(a.ell, 2000),
        truncation: auto_or(a.truncation.as_deref(), || Ok(default_truncation(dim, sigma)), "M")?,
        tau: auto_or(a.tau.as_deref(), || Ok(population_delta / 2.0), "tau")?,
        schedule,
        confidence: 0.05,
        seed: need(a.seed, 0),
    };
    test.validate()?;
    let cfg = DistinguishConfig {
        gamma,
        sigma,
        dim,
        trials: need(a.trials, 100),
        population_delta,
        test,
    };
    let g = run_experiment(Truth::Gaussian, dim, &cfg.test, cfg.trials)?;
    let pk = run_experiment(Truth::Pancakes { gamma, sigma }, dim, &cfg.test, cfg.trials)?;

    let sink = Sink::parse(a.out.as_deref().unwrap_or("-"));
    let cols = ["truth", "trial", "delta_hat", "std_err", "verdict", "truncation_events"].map(String::from);
    let mut csv = Csv::create(&sink, "distinguish", &cfg, &cols)?;
    for o in g.outcomes.iter().chain(&pk.outcomes) {
        csv.row(&[
            Field::S(o.truth.into()),
            Field::I(o.trial),
            Field::F(o.delta_hat),
            Field::F(o.std_err),
            Field::S(o.verdict.to_string()),
            Field::I(o.truncation_events as u64),
        ])?;
    }
    csv.finish()?;
    write_json(&sink.sidecar(a.report.as_deref(), "report.json"), "distinguish", &cfg, &advantage(g, pk))
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Contrast width; default 1/(√π γ).
    #[arg(long)]
    pub beta: Option<f64>,
    /// auto | grid | fib | random:COUNT
    #[arg(long)]
    pub net: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feed standard Gaussian data instead of pancakes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub gaussian: Option<bool>,
    #[arg(long)]
    pub out: Option<String>,
    /// Per-candidate objective CSV.
    #[arg(long)]
    pub dump_objective: Option<String>,
}

#[derive(Debug, Serialize)]
struct EstimateConfig {
    gamma: f64,
    sigma: f64,
    dim: usize,
    trials: usize,
    gaussian: bool,
    estimator: EstimatorConfig,
}

fn parse_net(spec: Option<&str>, d: usize) -> Result<NetMode> {
    match spec.unwrap_or("auto") {
        "auto" => Ok(NetMode::for_dim(d)),
        "grid" => Ok(NetMode::AngularGrid),
        "fib" => Ok(NetMode::Fibonacci),
        s => match s.strip_prefix("random:").map(str::parse::<usize>) {
            Some(Ok(c)) if c > 0 => Ok(NetMode::Random(c)),
            _ => Err(Error::config(format!("unknown net {s:?}"))),
        },
    }
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let gamma = need(a.gamma, 4.0);
    let dim = positive_dim(need(a.dim, 2))?;
    let cfg = EstimateConfig {
        gamma,
        sigma: need(a.sigma, 0.01),
        dim,
        trials: need(a.trials, 1).max(1),
        gaussian: need(a.gaussian, false),
        estimator: EstimatorConfig {
            eta: need(a.eta, 0.01),
            beta: Some(a.beta.unwrap_or_else(|| default_beta(gamma))),
            n: need(a.n, 200_000),
            net: parse_net(a.net.as_deref(), dim)?,
            seed: need(a.seed, 0),
        },
    };
    let seed = cfg.estimator.seed;
    let sink = Sink::parse(a.out.as_deref().unwrap_or("-"));
    let mut cols: Vec<String> = ["trial", "overlap", "objective", "median", "pooled_se", "low_confidence", "candidates"]
        .map(String::from)
        .to_vec();
    cols.extend(indexed("u", dim));
    cols.extend(indexed("u_hat", dim));
    let mut csv = Csv::create(&sink, "estimate", &cfg, &cols)?;
    let mut dump = match &a.dump_objective {
        Some(path) => {
            let mut c = vec!["trial".to_string(), "index".into(), "objective".into()];
            c.extend(indexed("v", dim));
            Some(Csv::create(&Sink::parse(path), "estimate", &cfg, &c)?)
        }
        None => None,
    };
    for trial in 0..cfg.trials as u64 {
        let u = random_direction(dim, &mut seeding::stream(seed, &[domain::DIRECTION, trial]));
        let mut rng = seeding::stream(seed, &[domain::SAMPLE, trial]);
        let xs = if cfg.gaussian {
            Array2::from_shape_simple_fn((cfg.estimator.n, dim), || sample_q(&mut rng))
        } else {
            PancakeParams::new(gamma, cfg.sigma, u.clone())?.sample(cfg.estimator.n, &mut rng)?
        };
        let est_cfg = EstimatorConfig {
            seed: seeding::derive_key(seed, &[domain::ESTIMATE, trial]),
            ..cfg.estimator
        };
        let est = estimate_direction(xs.view(), &est_cfg, gamma)?;
        let overlap = est.u_hat.dot(&u).powi(2);
        let mut row = vec![
            Field::I(trial),
            Field::F(overlap),
            Field::F(est.objective),
            Field::F(est.median),
            Field::F(est.pooled_se),
            Field::S(est.low_confidence.to_string()),
            Field::I(est.candidates.len() as u64),
        ];
        row.extend(floats(u.iter().copied()));
        row.extend(floats(est.u_hat.iter().copied()));
        csv.row(&row)?;
        if let Some(d) = dump.as_mut() {
            for (i, (v, obj)) in est.candidates.iter().zip(&est.objectives).enumerate() {
                let mut r = vec![Field::I(trial), Field::I(i as u64), Field::F(*obj)];
                r.extend(floats(v.iter().copied()));
                d.row(&r)?;
            }
        }
    }
    csv.finish()?;
    if let Some(d) = dump {
        d.finish()?;
    }
    Ok(())
}

// ---------------------------------------------------------------- hermite

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Largest degree; default max(200, ⌈10πγ²⌉).
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Serialize)]
struct HermiteConfig {
    gamma: f64,
    kmax: usize,
}

pub fn hermite(a: HermiteArgs) -> Result<()> {
    let gamma = need(a.gamma, 2.0);
    let cfg = HermiteConfig {
        gamma,
        kmax: a.kmax.unwrap_or_else(|| default_degree(gamma)),
    };
    let table = AlphaTable::new(gamma, cfg.kmax)?;
    let mut bounds = std::collections::BTreeMap::new();
    let (k, b) = rounded_degree_bound(gamma);
    bounds.insert(k, b);
    for ell in 1.. {
        match integral_degree_bound(gamma, ell) {
            Some((k, b)) if k <= cfg.kmax => {
                let e = bounds.entry(k).or_insert(b);
                *e = e.max(b);
            }
            _ => break,
        }
    }
    let sink = Sink::parse(a.out.as_deref().unwrap_or("-"));
    let mut csv = Csv::create(&sink, "hermite", &cfg, &["k".into(), "alpha".into(), "lower_bound".into()])?;
    for k in 0..=cfg.kmax {
        let alpha = table.get(k).expect("k within table");
        let lb = bounds.get(&k).map_or(Field::Empty, |&b| Field::F(b));
        csv.row(&[Field::I(k as u64), Field::F(alpha), lb])?;
    }
    csv.finish()
}

// ---------------------------------------------------------------- verify-bounds

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBoundsArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Monte Carlo draws for the second-moment check.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report, or - for stdout.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Serialize)]
struct VerifyConfig {
    gamma: f64,
    sigma: f64,
    dim: usize,
    options: ReportOptions,
}

pub fn verify_bounds(a: VerifyBoundsArgs) -> Result<()> {
    let defaults = ReportOptions::default();
    let cfg = VerifyConfig {
        gamma: need(a.gamma, 3.0),
        sigma: need(a.sigma, 1.0),
        dim: positive_dim(need(a.dim, 2))?,
        options: ReportOptions {
            quad: QuadSpec::default(),
            mc_samples: need(a.mc_samples, defaults.mc_samples),
            seed: need(a.seed, 0),
            ..defaults
        },
    };
    let report = bounds_report_with(cfg.gamma, cfg.sigma, cfg.dim, &cfg.options)?;
    if !report.all_pass() {
        log::warn!("some bounds failed at gamma = {}, sigma = {}", cfg.gamma, cfg.sigma);
    }
    write_json(&Sink::parse(a.out.as_deref().unwrap_or("-")), "verify-bounds", &cfg, &report)
}

// ---------------------------------------------------------------- selftest

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report, or - for stdout; a pass/fail line per check always goes to stdout.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Serialize)]
struct SelftestConfig {
    seed: u64,
}

pub fn selftest(a: SelftestArgs) -> Result<()> {
    let cfg = SelftestConfig { seed: need(a.seed, 0) };
    let report = crate::selftest::run(cfg.seed);
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(out) = &a.out {
        write_json(&Sink::parse(out), "selftest", &cfg, &report)?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Error::Numeric(format!("{failed} selftest checks failed")));
    }
    Ok(())
}
