//! Score-based Gaussianity test. Given a score oracle for a forward process,
//! estimate Δ = max_k E_Q‖s_{kh}(z) + 2πz‖² by Monte Carlo and declare the
//! data Gaussian when the estimate is at most τ/2.

use crate::diffusion::{truncate, DiffusionSchedule, ExactPancakeOracle, GaussianOracle, ScoreOracle};
use crate::error::{Error, Result};
use crate::gauss1d::{forward_sigma, LikelihoodRatio, SmoothedDGParams};
use crate::pancakes::{random_direction, PancakeParams};
use crate::quad::{periodic_breaks, PanelRule};
use crate::seeding::{self, domain};
use crate::stats::{sample_q, wilson_interval, MeanEstimate};
use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherConfig {
    /// Gaussian queries per discretization step.
    pub ell: usize,
    /// Truncation level for oracle outputs.
    pub truncation: f64,
    /// Decision threshold; Gaussian iff Δ̂ ≤ τ/2.
    pub tau: f64,
    pub schedule: DiffusionSchedule,
    /// Target failure probability, used only by [`ell_for_accuracy`].
    pub confidence: f64,
    pub seed: u64,
}

impl DistinguisherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::config("ell must be >= 1"));
        }
        if !(self.truncation > 0.0) {
            return Err(Error::config(format!("truncation level must be positive, got {}", self.truncation)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::config(format!("confidence must lie in (0, 1), got {}", self.confidence)));
        }
        Ok(())
    }
}

/// Default truncation level 8(√d + 1/σ²).
pub fn default_truncation(d: usize, sigma: f64) -> f64 {
    8.0 * ((d as f64).sqrt() + 1.0 / (sigma * sigma))
}

/// Default desk schedule for the test: T = 1 with N = 100 steps.
pub fn default_schedule() -> DiffusionSchedule {
    DiffusionSchedule::new(1.0, 100).expect("valid constants")
}

/// ℓ = ⌈M⁴·ln(N/δ)/ε²⌉, enough queries per step for ±ε accuracy of every
/// Δ̂^(k) with probability 1 - δ (unit constants).
pub fn ell_for_accuracy(truncation: f64, steps: usize, confidence: f64, eps: f64) -> f64 {
    (truncation.powi(4) * (steps as f64 / confidence).ln() / (eps * eps)).ceil()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Gaussian,
    Pancakes,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Gaussian => "gaussian",
            Verdict::Pancakes => "pancakes",
        })
    }
}

/// Per-step estimate Δ̂^(k) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepEstimate {
    pub step: usize,
    pub value: f64,
    pub std_err: f64,
    pub truncations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub delta_hat: f64,
    /// Step attaining the maximum.
    pub argmax: usize,
    pub per_step: Vec<StepEstimate>,
    pub truncation_events: usize,
    pub verdict: Option<Verdict>,
}

impl Decision {
    /// Standard error of the maximising step's estimate.
    pub fn std_err(&self) -> f64 {
        self.per_step
            .iter()
            .find(|s| s.step == self.argmax)
            .map_or(0.0, |s| s.std_err)
    }
}

/// Δ̂ for one trial. Step k ∈ 1..=N uses ℓ fresh queries from the stream
/// (seed, trial, k), so the result does not depend on worker count.
pub fn delta_hat<O: ScoreOracle + ?Sized>(oracle: &O, cfg: &DistinguisherConfig, trial: u64) -> Result<Decision> {
    cfg.validate()?;
    let n = oracle.schedule().steps();
    let d = oracle.dim();
    let per_step: Vec<StepEstimate> = (1..=n)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeding::stream(cfg.seed, &[domain::DISTINGUISH, trial, k as u64]);
            let mut summands = Vec::with_capacity(cfg.ell);
            let mut truncations = 0;
            for _ in 0..cfg.ell {
                let z: Array1<f64> = (0..d).map(|_| sample_q(&mut rng)).collect();
                let mut v = oracle.eval(k, z.view()).map_err(|e| Error::Oracle {
                    step: k,
                    source: Box::new(e),
                })?;
                if truncate(&mut v, cfg.truncation) {
                    truncations += 1;
                }
                v.scaled_add(2.0 * PI, &z);
                summands.push(v.dot(&v));
            }
            let est = MeanEstimate::from_slice(&summands);
            Ok(StepEstimate {
                step: k,
                value: est.mean,
                std_err: est.std_err,
                truncations,
            })
        })
        .collect::<Result<_>>()?;
    let best = per_step
        .iter()
        .fold(&per_step[0], |b, s| if s.value > b.value { s } else { b });
    let delta_hat = best.value;
    if !delta_hat.is_finite() {
        return Err(Error::Numeric("non-finite statistic".into()));
    }
    Ok(Decision {
        delta_hat,
        argmax: best.step,
        truncation_events: per_step.iter().map(|s| s.truncations).sum(),
        per_step,
        verdict: None,
    })
}

/// Gaussian iff Δ̂ ≤ τ/2.
pub fn decide(delta_hat: f64, tau: f64) -> Result<Verdict> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    Ok(if delta_hat <= tau / 2.0 {
        Verdict::Gaussian
    } else {
        Verdict::Pancakes
    })
}

/// Runs [`delta_hat`] and attaches the verdict.
pub fn test<O: ScoreOracle + ?Sized>(oracle: &O, cfg: &DistinguisherConfig, trial: u64) -> Result<Decision> {
    let mut d = delta_hat(oracle, cfg, trial)?;
    d.verdict = Some(decide(d.delta_hat, cfg.tau)?);
    Ok(d)
}

/// E_Q[(T′/T)²] for A_γ^σ by quadrature with panels aligned to the pancakes
/// and graded towards the sign changes between them.
pub fn score_energy(gamma: f64, sigma: f64) -> Result<f64> {
    let p = SmoothedDGParams::new(gamma, sigma)?;
    let lr = LikelihoodRatio::new(p)?;
    let b = p.stretch();
    let s = p.s();
    let period = 1.0 / (gamma * b);
    let per_period = ((8.0 * period / s).ceil() as usize).max(64);
    let switch = b * s * s * gamma / (2.0 * PI);
    let breaks = periodic_breaks(-6.0, 6.0, period, 0.0, per_period, Some(switch));
    let rule = PanelRule::new(16);
    Ok(rule.over(&breaks, |z| {
        let f = lr.score_ratio(z);
        (-PI * z * z).exp() * f * f
    }))
}

/// Population Δ^(k) of the exact pancake oracle for k = 1..=N.
pub fn quadrature_delta_per_step(gamma: f64, sigma: f64, sched: &DiffusionSchedule) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma must be positive"));
    }
    (1..=sched.steps())
        .into_par_iter()
        .map(|k| score_energy(gamma, forward_sigma(sigma, sched.time(k))))
        .collect()
}

/// Population Δ for the exact pancake oracle: max over steps of
/// E_Q[(T′/T)²] at the forward-process thickness.
pub fn quadrature_delta(p: &PancakeParams, sched: &DiffusionSchedule) -> Result<f64> {
    let v = quadrature_delta_per_step(p.gamma(), p.sigma(), sched)?;
    Ok(v.into_iter().fold(0.0, f64::max))
}

/// Which hypothesis generated the data in an experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Truth {
    Gaussian,
    Pancakes { gamma: f64, sigma: f64 },
}

impl Truth {
    pub fn expected(&self) -> Verdict {
        match self {
            Truth::Gaussian => Verdict::Gaussian,
            Truth::Pancakes { .. } => Verdict::Pancakes,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Truth::Gaussian => "gaussian",
            Truth::Pancakes { .. } => "pancakes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub truth: &'static str,
    pub delta_hat: f64,
    pub std_err: f64,
    pub verdict: Verdict,
    pub correct: bool,
    pub truncation_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub truth: &'static str,
    pub trials: usize,
    pub correct: usize,
    pub success_rate: f64,
    pub success_ci95: (f64, f64),
    /// Fraction of trials that answered "pancakes".
    pub pancake_rate: f64,
    pub mean_delta_hat: f64,
    pub outcomes: Vec<TrialOutcome>,
}

/// Runs `trials` independent tests with oracles built per trial by `make`.
pub fn run_arm<F>(truth: Truth, cfg: &DistinguisherConfig, trials: usize, make: F) -> Result<ArmReport>
where
    F: Fn(u64) -> Result<Box<dyn ScoreOracle>> + Sync,
{
    if trials == 0 {
        return Err(Error::config("trials must be >= 1"));
    }
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let oracle = make(trial)?;
            let d = test(oracle.as_ref(), cfg, trial)?;
            let verdict = d.verdict.expect("test sets a verdict");
            Ok(TrialOutcome {
                trial,
                truth: truth.label(),
                delta_hat: d.delta_hat,
                std_err: d.std_err(),
                verdict,
                correct: verdict == truth.expected(),
                truncation_events: d.truncation_events,
            })
        })
        .collect::<Result<_>>()?;
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let pancakes = outcomes.iter().filter(|o| o.verdict == Verdict::Pancakes).count();
    Ok(ArmReport {
        truth: truth.label(),
        trials,
        correct,
        success_rate: correct as f64 / trials as f64,
        success_ci95: wilson_interval(correct, trials),
        pancake_rate: pancakes as f64 / trials as f64,
        mean_delta_hat: outcomes.iter().map(|o| o.delta_hat).sum::<f64>() / trials as f64,
        outcomes,
    })
}

/// One arm with exact oracles: the Gaussian score, or the pancake score for a
/// hidden direction drawn uniformly from the sphere in every trial.
pub fn run_experiment(truth: Truth, dim: usize, cfg: &DistinguisherConfig, trials: usize) -> Result<ArmReport> {
    let sched = cfg.schedule;
    run_arm(truth, cfg, trials, |trial| -> Result<Box<dyn ScoreOracle>> {
        match truth {
            Truth::Gaussian => Ok(Box::new(GaussianOracle::new(dim, sched))),
            Truth::Pancakes { gamma, sigma } => {
                let mut rng = seeding::stream(cfg.seed, &[domain::DIRECTION, trial]);
                let u = random_direction(dim, &mut rng);
                let p = PancakeParams::new(gamma, sigma, u)?;
                Ok(Box::new(ExactPancakeOracle::new(&p, sched)?))
            }
        }
    })
}

/// Both arms with their advantage |P_pancakes[say pancakes] - P_gauss[say pancakes]|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub gaussian: ArmReport,
    pub pancakes: ArmReport,
    pub advantage: f64,
    /// Conservative interval from the two arms' Wilson intervals.
    pub advantage_ci95: (f64, f64),
}

pub fn advantage(gaussian: ArmReport, pancakes: ArmReport) -> ExperimentReport {
    let adv = (pancakes.pancake_rate - gaussian.pancake_rate).abs();
    // "says pancakes" rates and their intervals
    let (gl, gh) = wilson_interval(gaussian.trials - gaussian.correct, gaussian.trials);
    let (pl, ph) = pancakes.success_ci95;
    let lo = (pl - gh).max(0.0);
    let hi = (ph - gl).min(1.0);
    ExperimentReport {
        gaussian,
        pancakes,
        advantage: adv,
        advantage_ci95: (lo.min(adv), hi.max(adv)),
    }
}
