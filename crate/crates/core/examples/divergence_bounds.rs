//! TV and KL to the Gaussian over a parameter grid, with the bound checklist.

use pancake_lab::divergence::{bounds_report_with, tv_witness, ReportOptions, Status};

fn main() -> pancake_lab::Result<()> {
    let opts = ReportOptions {
        mc_samples: 20_000,
        ..Default::default()
    };
    println!("{:>5} {:>6} {:>11} {:>11}  checks", "gamma", "sigma", "tv", "kl");
    for gamma in [1.5, 3.0, 6.0] {
        for sigma in [0.005, 0.05, 0.25, 1.0] {
            let r = bounds_report_with(gamma, sigma, 2, &opts)?;
            let passed = r.checks.iter().filter(|c| c.status == Status::Pass).count();
            let na = r.checks.iter().filter(|c| c.status == Status::NotApplicable).count();
            println!(
                "{gamma:>5} {sigma:>6} {:>11.4e} {:>11.4e}  {passed} pass, {na} n/a, {} fail",
                r.tv,
                r.kl.unwrap_or(f64::NAN),
                r.checks.len() - passed - na
            );
        }
    }
    let w = tv_witness(6.0, 0.005)?;
    println!("witness at (6, 0.005): delta {:.4}, A(S) {:.4}, Q(S) {:.4}", w.delta, w.a_mass, w.q_mass);
    Ok(())
}
