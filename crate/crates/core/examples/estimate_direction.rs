//! Brute-force recovery of the hidden direction in 2-D, and the same search on
//! Gaussian data where the objective is flat.

use ndarray::Array2;
use pancake_lab::estimate::{estimate_direction, EstimatorConfig, NetMode};
use pancake_lab::pancakes::{random_direction, PancakeParams};
use pancake_lab::seeding;
use pancake_lab::stats::sample_q;

fn main() -> pancake_lab::Result<()> {
    let (gamma, sigma, n) = (4.0, 0.01, 50_000);
    let cfg = EstimatorConfig {
        eta: 0.01,
        beta: None,
        n,
        net: NetMode::AngularGrid,
        seed: 0,
    };
    let u = random_direction(2, &mut seeding::stream(5, &[0]));
    let xs = PancakeParams::new(gamma, sigma, u.clone())?.sample(n, &mut seeding::stream(5, &[1]))?;
    let est = estimate_direction(xs.view(), &cfg, gamma)?;
    println!(
        "pancakes: <u_hat,u>^2 = {:.6}, objective {:.4} vs median {:.4} (se {:.4}), low confidence: {}",
        est.u_hat.dot(&u).powi(2),
        est.objective,
        est.median,
        est.pooled_se,
        est.low_confidence
    );

    let mut rng = seeding::stream(5, &[2]);
    let g = Array2::from_shape_simple_fn((n, 2), || sample_q(&mut rng));
    let est = estimate_direction(g.view(), &cfg, gamma)?;
    println!(
        "gaussian: objective {:.4} vs median {:.4} (se {:.4}), low confidence: {}",
        est.objective, est.median, est.pooled_se, est.low_confidence
    );
    Ok(())
}
