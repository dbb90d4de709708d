//! Samples -> estimated direction -> plug-in score -> Gaussianity test. The
//! plug-in score certifies non-Gaussianity once the direction is known.

use ndarray::Array2;
use pancake_lab::diffusion::GaussianOracle;
use pancake_lab::distinguish::{default_schedule, default_truncation, quadrature_delta, test, DistinguisherConfig};
use pancake_lab::estimate::{estimate_direction, score_from_direction, EstimatorConfig, NetMode};
use pancake_lab::pancakes::{random_direction, PancakeParams};
use pancake_lab::seeding;
use pancake_lab::stats::sample_q;

fn main() -> pancake_lab::Result<()> {
    let (gamma, sigma, n) = (4.0, 0.01, 50_000);
    let schedule = default_schedule();
    let u = random_direction(2, &mut seeding::stream(9, &[0]));
    let p = PancakeParams::new(gamma, sigma, u.clone())?;
    let cfg = DistinguisherConfig {
        ell: 1000,
        truncation: default_truncation(2, sigma),
        tau: quadrature_delta(&p, &schedule)? / 2.0,
        schedule,
        confidence: 0.05,
        seed: 9,
    };
    let est_cfg = EstimatorConfig {
        eta: 0.01,
        beta: None,
        n,
        net: NetMode::AngularGrid,
        seed: 9,
    };

    let xs = p.sample(n, &mut seeding::stream(9, &[1]))?;
    let est = estimate_direction(xs.view(), &est_cfg, gamma)?;
    let oracle = score_from_direction(est.u_hat.view(), gamma, sigma, schedule)?;
    let d = test(&oracle, &cfg, 0)?;
    println!("pancake data:  <u_hat,u>^2 {:.5}, delta_hat {:.3} -> {}", est.u_hat.dot(&u).powi(2), d.delta_hat, d.verdict.unwrap());

    let mut rng = seeding::stream(9, &[2]);
    let g = Array2::from_shape_simple_fn((n, 2), || sample_q(&mut rng));
    let est = estimate_direction(g.view(), &est_cfg, gamma)?;
    let d = test(&GaussianOracle::new(2, schedule), &cfg, 1)?;
    println!("gaussian data: low confidence {}, delta_hat {:.3} -> {}", est.low_confidence, d.delta_hat, d.verdict.unwrap());
    Ok(())
}
