//! A quick invariant suite over every module, used by `pancake selftest`.

use crate::diffusion::{ddpm_sample, gaussian_variance_recurrence, DiffusionSchedule, ExactPancakeOracle, GaussianOracle};
use crate::distinguish::{delta_hat, quadrature_delta, DistinguisherConfig};
use crate::divergence::{bounds_report_with, tv_witness, ReportOptions};
use crate::error::Result;
use crate::estimate::{estimate_direction, EstimatorConfig, NetMode};
use crate::gauss1d::{LikelihoodRatio, SmoothedDGParams};
use crate::hermite::{alpha, gram_error, inner_product_quadrature, rounded_degree_bound, series_objective, smoothing_identity_check, AlphaTable};
use crate::pancakes::{default_direction, second_moment_deficit_1d, PancakeParams};
use crate::quad::{periodic_breaks, PanelRule};
use crate::seeding::{self, domain};
use crate::stats::MeanEstimate;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<SelfCheck>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type Outcome = Result<(bool, String)>;

pub fn run(seed: u64) -> SelftestReport {
    let cases: Vec<(&'static str, Box<dyn Fn(u64) -> Outcome>)> = vec![
        ("ratio_normalisation", Box::new(|_| ratio_normalisation())),
        ("score_symmetry", Box::new(|_| score_symmetry())),
        ("second_moment", Box::new(|_| second_moment())),
        ("hermite_gram", Box::new(|_| {
            let e = gram_error(12);
            Ok((e < 1e-8, format!("max |G - I| = {e:.2e}")))
        })),
        ("hermite_coefficients", Box::new(|_| hermite_coefficients())),
        ("smoothing_identity", Box::new(|_| smoothing_identity())),
        ("series_vs_quadrature", Box::new(|_| {
            let t = AlphaTable::for_series(2.0, 0.3, 0.3)?;
            let s = series_objective(0.3, 0.3, 2.0, &t)?;
            let q = inner_product_quadrature(2.0, 0.3, 0.3)?;
            Ok(((s - q).abs() < 1e-6, format!("series {s:.12} quadrature {q:.12}")))
        })),
        ("bounds_report", Box::new(bounds)),
        ("tv_witness", Box::new(|_| {
            let w = tv_witness(6.0, 0.005)?;
            Ok((w.gap > 1.0 - 2.0 * w.delta && w.a_mass >= 1.0 - w.delta, format!("delta {:.3e} gap {:.6}", w.delta, w.gap)))
        })),
        ("ddpm_gaussian_variance", Box::new(ddpm_variance)),
        ("distinguisher_gaussian", Box::new(distinguisher_gaussian)),
        ("distinguisher_pancakes", Box::new(distinguisher_pancakes)),
        ("estimator", Box::new(estimator)),
        ("determinism", Box::new(determinism)),
    ];
    let checks = cases
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = f(seed).unwrap_or_else(|e| (false, format!("error: {e}")));
            SelfCheck { name, passed, detail }
        })
        .collect();
    SelftestReport { checks }
}

fn ratio_normalisation() -> Outcome {
    let mut worst = 0.0f64;
    for &(g, s) in &[(1.5, 0.05), (6.0, 0.25), (3.0, 1.0)] {
        let p = SmoothedDGParams::new(g, s)?;
        let lr = LikelihoodRatio::new(p)?;
        let period = 1.0 / (g * p.stretch());
        let per = ((8.0 * period / p.s()).ceil() as usize).max(64);
        let breaks = periodic_breaks(-6.5, 6.5, period, 0.0, per, None);
        let mass = PanelRule::new(16).over(&breaks, |z| lr.density(z));
        worst = worst.max((mass - 1.0).abs());
    }
    Ok((worst < 1e-10, format!("max |mass - 1| = {worst:.2e}")))
}

fn score_symmetry() -> Outcome {
    let lr = LikelihoodRatio::new(SmoothedDGParams::new(6.0, 0.05)?)?;
    let at0 = lr.score_ratio(0.0);
    let mut worst = 0.0f64;
    for i in 1..200 {
        let z = 0.01 * i as f64;
        worst = worst.max((lr.score_ratio(z) + lr.score_ratio(-z)).abs());
    }
    Ok((at0 == 0.0 && worst < 1e-9, format!("f(0) = {at0}, max |f(z) + f(-z)| = {worst:.2e}")))
}

fn second_moment() -> Outcome {
    let mut least = f64::INFINITY;
    for g in [1.5, 3.0, 6.0] {
        for s in [0.0, 0.005, 0.05, 0.25, 1.0] {
            least = least.min(second_moment_deficit_1d(g, s));
        }
    }
    Ok((least >= 0.0, format!("min 1/(2 pi) - E[y^2] = {least:.3e}")))
}

fn hermite_coefficients() -> Outcome {
    let t = AlphaTable::new(2.0, 40)?;
    let parity = t.get(0) == Some(1.0) && (1..=40).step_by(2).all(|k| t.get(k) == Some(0.0));
    let mut ok = parity;
    let mut detail = format!("parity {parity}");
    for g in [1.5, 2.0, 3.0] {
        let (k, b) = rounded_degree_bound(g);
        let a = alpha(k, g)?.abs();
        ok &= a >= b;
        detail.push_str(&format!("; |alpha_{k}({g})| = {a:.4} >= {b:.4}"));
    }
    Ok((ok, detail))
}

fn smoothing_identity() -> Outcome {
    let mut worst = 0.0f64;
    for sigma in [0.2, 0.4, 1.0] {
        for i in 0..13 {
            let x = -0.75 + 0.125 * i as f64;
            worst = worst.max(smoothing_identity_check(x, 0.3, sigma, 2.0)?.2);
        }
    }
    Ok((worst < 1e-8, format!("max |lhs - rhs| = {worst:.2e}")))
}

fn bounds(seed: u64) -> Outcome {
    let opts = ReportOptions {
        mc_samples: 20_000,
        grid_points: 20_001,
        seed,
        ..Default::default()
    };
    let a = bounds_report_with(3.0, 1.0, 2, &opts)?;
    let b = bounds_report_with(6.0, 0.005, 2, &opts)?;
    Ok((a.all_pass() && b.all_pass() && b.tv > 0.5, format!("tv(3, 1) = {:.3e}, tv(6, 0.005) = {:.6}", a.tv, b.tv)))
}

fn ddpm_variance(seed: u64) -> Outcome {
    let sched = DiffusionSchedule::new(2.0, 100)?;
    let ys = ddpm_sample(&GaussianOracle::new(2, sched), 4000, seed)?;
    let want = gaussian_variance_recurrence(sched.step(), 100) / (2.0 * PI);
    let mut ok = true;
    let mut detail = format!("predicted {want:.6}");
    for c in ys.columns() {
        let sq: Vec<f64> = c.iter().map(|v| v * v).collect();
        let m = MeanEstimate::from_slice(&sq);
        ok &= m.within(want, 4.0);
        detail.push_str(&format!(", {:.6}", m.mean));
    }
    Ok((ok, detail))
}

fn test_config(seed: u64, sched: DiffusionSchedule, tau: f64) -> DistinguisherConfig {
    DistinguisherConfig {
        ell: 500,
        truncation: 40.0,
        tau,
        schedule: sched,
        confidence: 0.05,
        seed,
    }
}

fn distinguisher_gaussian(seed: u64) -> Outcome {
    let sched = DiffusionSchedule::new(1.0, 20)?;
    let d = delta_hat(&GaussianOracle::new(4, sched), &test_config(seed, sched, 1.0), 0)?;
    Ok((d.delta_hat == 0.0 && d.truncation_events == 0, format!("delta_hat = {}", d.delta_hat)))
}

fn distinguisher_pancakes(seed: u64) -> Outcome {
    let sched = DiffusionSchedule::new(1.0, 20)?;
    let p = PancakeParams::new(4.0, 0.05, default_direction(4))?;
    let want = quadrature_delta(&p, &sched)?;
    let cfg = DistinguisherConfig {
        truncation: 1e6,
        ..test_config(seed, sched, want / 2.0)
    };
    let d = delta_hat(&ExactPancakeOracle::new(&p, sched)?, &cfg, 0)?;
    // The max over steps is biased up by a few SE at most.
    let ok = d.delta_hat > want / 2.0 && (d.delta_hat - want).abs() < 6.0 * d.std_err();
    Ok((ok, format!("delta_hat {:.4} +- {:.4}, population {want:.4}", d.delta_hat, d.std_err())))
}

fn estimator(seed: u64) -> Outcome {
    let u = default_direction(2);
    let p = PancakeParams::new(4.0, 0.01, u.clone())?;
    let xs = p.sample(20_000, &mut seeding::stream(seed, &[domain::SAMPLE]))?;
    let cfg = EstimatorConfig {
        eta: 0.02,
        beta: None,
        n: 20_000,
        net: NetMode::AngularGrid,
        seed,
    };
    let est = estimate_direction(xs.view(), &cfg, 4.0)?;
    let overlap = est.u_hat.dot(&u).powi(2);
    Ok((overlap >= 0.99 && !est.low_confidence, format!("<u_hat, u>^2 = {overlap:.5}")))
}

fn determinism(seed: u64) -> Outcome {
    let sched = DiffusionSchedule::new(1.0, 50)?;
    let p = PancakeParams::new(4.0, 0.1, default_direction(3))?;
    let o = ExactPancakeOracle::new(&p, sched)?;
    let a = ddpm_sample(&o, 64, seed)?;
    let b = ddpm_sample(&o, 64, seed)?;
    let same = a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok((same, format!("{} values compared", a.len())))
}
