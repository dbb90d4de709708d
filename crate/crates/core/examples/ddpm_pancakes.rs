//! Reverse diffusion with the exact pancake score. Finer discretizations put
//! the projected samples closer to the smoothed discrete Gaussian.

use pancake_lab::diffusion::{ddpm_sample, DiffusionSchedule, ExactPancakeOracle};
use pancake_lab::gauss1d::{cdf_smoothed, SmoothedDGParams};
use pancake_lab::pancakes::{default_direction, PancakeParams};
use pancake_lab::stats::{histogram_tv, ks_critical, ks_statistic};

fn main() -> pancake_lab::Result<()> {
    let (gamma, sigma) = (4.0, 0.1);
    let p = PancakeParams::new(gamma, sigma, default_direction(2))?;
    let line = SmoothedDGParams::new(gamma, sigma)?;
    let runs = 4000;
    for steps in [100, 400, 1600] {
        let oracle = ExactPancakeOracle::new(&p, DiffusionSchedule::new(4.0, steps)?)?;
        let ys = ddpm_sample(&oracle, runs, 1)?;
        let proj: Vec<f64> = ys.rows().into_iter().map(|r| r.dot(&p.direction())).collect();
        let ks = ks_statistic(&proj, |z| cdf_smoothed(z, &line));
        let tv = histogram_tv(&proj, |z| cdf_smoothed(z, &line), -2.0, 2.0, 100);
        println!("N = {steps:5}: KS {ks:.4} (1% critical {:.4}), histogram TV {tv:.4}", ks_critical(runs, 0.01));
    }
    Ok(())
}
