//! Score-based Gaussianity test with exact oracles on both hypotheses.

use pancake_lab::distinguish::{advantage, default_schedule, default_truncation, quadrature_delta, run_experiment, DistinguisherConfig, Truth};
use pancake_lab::pancakes::{default_direction, PancakeParams};

fn main() -> pancake_lab::Result<()> {
    let (d, gamma, sigma) = (16, 4.0, 0.05);
    let schedule = default_schedule();
    let delta = quadrature_delta(&PancakeParams::new(gamma, sigma, default_direction(d))?, &schedule)?;
    let cfg = DistinguisherConfig {
        ell: 500,
        truncation: default_truncation(d, sigma),
        tau: delta / 2.0,
        schedule,
        confidence: 0.05,
        seed: 3,
    };
    let g = run_experiment(Truth::Gaussian, d, &cfg, 20)?;
    let p = run_experiment(Truth::Pancakes { gamma, sigma }, d, &cfg, 20)?;
    println!("population delta {delta:.3}, threshold tau/2 = {:.3}", cfg.tau / 2.0);
    println!("gaussian arm: success {:.2}, mean delta_hat {:.4}", g.success_rate, g.mean_delta_hat);
    println!("pancake arm:  success {:.2}, mean delta_hat {:.4}", p.success_rate, p.mean_delta_hat);
    let r = advantage(g, p);
    println!("advantage {:.2} (95% CI {:.2}..{:.2})", r.advantage, r.advantage_ci95.0, r.advantage_ci95.1);
    Ok(())
}
