//! Brute-force projection pursuit for the hidden direction, and the score
//! oracle built from an estimated direction.

use crate::diffusion::{DiffusionSchedule, ExactPancakeOracle};
use crate::error::{Error, Result};
use crate::gauss1d::{LikelihoodRatio, SmoothedDGParams};
use crate::hermite::{series_excess, series_objective, AlphaTable};
use crate::pancakes::{random_direction, PancakeParams};
use crate::seeding::{self, domain, StreamRng};
use crate::stats::MeanEstimate;
use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Candidate set over the half-sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetMode {
    /// Angles jη on [0, π), d = 2 only.
    AngularGrid,
    /// Upper half of a spherical Fibonacci lattice, d = 3 only.
    Fibonacci,
    /// `count` random unit vectors; no coverage guarantee.
    Random(usize),
}

impl NetMode {
    /// The natural net for dimension d.
    pub fn for_dim(d: usize) -> Self {
        match d {
            2 => NetMode::AngularGrid,
            3 => NetMode::Fibonacci,
            _ => NetMode::Random(4096),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub eta: f64,
    /// Contrast width; `None` means 1/(√π·γ).
    pub beta: Option<f64>,
    pub n: usize,
    pub net: NetMode,
    pub seed: u64,
}

/// Default contrast width 1/(√π·γ).
pub fn default_beta(gamma: f64) -> f64 {
    1.0 / (PI.sqrt() * gamma)
}

/// The contrast T_γ^β(z).
pub fn contrast(z: f64, gamma: f64, beta: f64) -> Result<f64> {
    Ok(contrast_fn(gamma, beta)?.ratio(z))
}

fn contrast_fn(gamma: f64, beta: f64) -> Result<LikelihoodRatio> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    LikelihoodRatio::new(SmoothedDGParams::new(gamma, beta)?)
}

fn check_unit(v: ArrayView1<f64>) -> Result<()> {
    let n = v.dot(&v).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        Err(Error::domain(format!("direction must be a unit vector, got norm {n}")))
    } else {
        Ok(())
    }
}

fn objective_with(samples: ArrayView2<f64>, v: ArrayView1<f64>, t: &LikelihoodRatio) -> (f64, f64) {
    let (mut s1, mut s2) = (0.0, 0.0);
    for row in samples.rows() {
        let c = t.ratio(row.dot(&v));
        s1 += c;
        s2 += c * c;
    }
    let n = samples.nrows() as f64;
    let mean = s1 / n;
    let var = if n > 1.0 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean, var)
}

/// Ê(v) = mean of T_γ^β(⟨x_i, v⟩) with its standard error.
pub fn empirical_objective(samples: ArrayView2<f64>, v: ArrayView1<f64>, gamma: f64, beta: f64) -> Result<MeanEstimate> {
    check_unit(v)?;
    if samples.ncols() != v.len() || samples.nrows() == 0 {
        return Err(Error::domain("sample matrix does not match the direction"));
    }
    let t = contrast_fn(gamma, beta)?;
    let (mean, variance) = objective_with(samples, v, &t);
    let n = samples.nrows();
    Ok(MeanEstimate {
        mean,
        std_err: (variance / n as f64).sqrt(),
        variance,
        n,
    })
}

/// E(v) = ⟨T^ξ, T^β⟩_Q through the Hermite series.
pub fn population_objective(xi: f64, gamma: f64, beta: f64) -> Result<f64> {
    let table = AlphaTable::for_series(gamma, xi, beta)?;
    series_objective(xi, beta, gamma, &table)
}

/// E(v) - 1, resolving differences that vanish next to the constant term.
pub fn population_excess(xi: f64, gamma: f64, beta: f64) -> Result<f64> {
    let table = AlphaTable::for_series(gamma, xi, beta)?;
    series_excess(xi, beta, gamma, &table)
}

/// ξ for a direction v against the hidden u: ξ² = (1+σ²)/⟨u,v⟩² - 1.
pub fn xi_for(cos: f64, sigma: f64) -> f64 {
    if cos == 0.0 {
        return f64::INFINITY;
    }
    ((1.0 + sigma * sigma) / (cos * cos) - 1.0).max(0.0).sqrt()
}

/// Half-sphere candidates; antipodal pairs never both appear.
pub fn candidate_net(d: usize, eta: f64, mode: NetMode, rng: &mut StreamRng) -> Result<Vec<Array1<f64>>> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("eta must lie in (0, 1), got {eta}")));
    }
    match (mode, d) {
        (NetMode::AngularGrid, 2) => {
            let count = (PI / eta).ceil() as usize;
            let step = PI / count as f64;
            Ok((0..count)
                .map(|j| {
                    let t = j as f64 * step;
                    Array1::from(vec![t.cos(), t.sin()])
                })
                .collect())
        }
        (NetMode::Fibonacci, 3) => {
            let mut full = (12.0 / (eta * eta)).ceil() as usize;
            full += full % 2;
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..full)
                .filter_map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / full as f64;
                    if z <= 0.0 {
                        return None;
                    }
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    Some(Array1::from(vec![r * phi.cos(), r * phi.sin(), z]))
                })
                .collect())
        }
        (NetMode::Random(count), _) => {
            if count == 0 {
                return Err(Error::config("random net needs at least one candidate"));
            }
            log::warn!("random net with {count} candidates in dimension {d}: coverage is heuristic");
            Ok((0..count)
                .map(|_| {
                    let mut v = random_direction(d, rng);
                    if let Some(&first) = v.iter().find(|c| **c != 0.0) {
                        if first < 0.0 {
                            v.mapv_inplace(|c| -c);
                        }
                    }
                    v
                })
                .collect())
        }
        (mode, d) => Err(Error::config(format!("net {mode:?} is not available in dimension {d}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionEstimate {
    pub u_hat: Array1<f64>,
    pub objective: f64,
    pub index: usize,
    pub median: f64,
    /// √2·s_p/√n with s_p² the mean per-candidate sample variance.
    pub pooled_se: f64,
    /// max - median below 3 pooled SE: the objective looks flat.
    pub low_confidence: bool,
    pub eta: f64,
    pub beta: f64,
    pub candidates: Vec<Array1<f64>>,
    pub objectives: Vec<f64>,
}

/// Argmax of Ê over the net; ties go to the lowest index.
pub fn estimate_direction(samples: ArrayView2<f64>, cfg: &EstimatorConfig, gamma: f64) -> Result<DirectionEstimate> {
    let d = samples.ncols();
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::config("need at least two samples"));
    }
    let eta = cfg.eta.min(1.0 / gamma);
    if eta < cfg.eta {
        log::info!("eta {} clamped to 1/gamma = {eta}", cfg.eta);
    }
    let beta = cfg.beta.unwrap_or_else(|| default_beta(gamma));
    let t = contrast_fn(gamma, beta)?;
    let mut rng = seeding::stream(cfg.seed, &[domain::NET]);
    let candidates = candidate_net(d, eta, cfg.net, &mut rng)?;
    let stats: Vec<(f64, f64)> = candidates
        .par_iter()
        .map(|v| objective_with(samples, v.view(), &t))
        .collect();
    let objectives: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let mut index = 0;
    for (i, &v) in objectives.iter().enumerate() {
        if v > objectives[index] {
            index = i;
        }
    }
    let mut sorted = objectives.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    let pooled_var = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let pooled_se = (2.0 * pooled_var / n as f64).sqrt();
    let objective = objectives[index];
    Ok(DirectionEstimate {
        u_hat: candidates[index].clone(),
        objective,
        index,
        median,
        pooled_se,
        low_confidence: objective - median < 3.0 * pooled_se,
        eta,
        beta,
        candidates,
        objectives,
    })
}

/// Score oracle built from an estimated direction: the exact pancake score of
/// the forward process with u replaced by û.
pub fn score_from_direction(u_hat: ArrayView1<f64>, gamma: f64, sigma: f64, sched: DiffusionSchedule) -> Result<ExactPancakeOracle> {
    check_unit(u_hat)?;
    let p = PancakeParams::new(gamma, sigma, u_hat.to_owned())?;
    ExactPancakeOracle::new(&p, sched)
}

/// Monte Carlo E_{P_u}‖ŝ(x) - s(x)‖² at time zero, where ŝ uses û.
pub fn score_error(p: &PancakeParams, u_hat: ArrayView1<f64>, samples: ArrayView2<f64>) -> Result<MeanEstimate> {
    check_unit(u_hat)?;
    let q = PancakeParams::new(p.gamma(), p.sigma(), u_hat.to_owned())?;
    let errs: Vec<f64> = samples
        .rows()
        .into_iter()
        .map(|x| {
            let diff = q.score(x)? - p.score(x)?;
            Ok(diff.dot(&diff))
        })
        .collect::<Result<_>>()?;
    Ok(MeanEstimate::from_slice(&errs))
}

/// A unit vector at L² distance η from u in the sense η² = 1 - ⟨û,u⟩²,
/// tilted towards `w` (which need not be orthogonal to u).
pub fn tilt(u: ArrayView1<f64>, w: ArrayView1<f64>, eta: f64) -> Array1<f64> {
    let mut perp = w.to_owned() - &(&u * u.dot(&w));
    let n = perp.dot(&perp).sqrt();
    perp /= n;
    let c = (1.0 - eta * eta).max(0.0).sqrt();
    &u * c + &perp * eta
}

/// Sample size (dγ³/η⁴)(ln(1/η) + ln(1/δ)) sufficient for the estimator.
pub fn sample_bound(d: usize, gamma: f64, eta: f64, delta: f64) -> f64 {
    d as f64 * gamma.powi(3) / eta.powi(4) * ((1.0 / eta).ln() + (1.0 / delta).ln())
}
