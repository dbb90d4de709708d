//! The score correction T'/T along the hidden direction, for shrinking
//! thickness. Sharper pancakes give a larger and more oscillatory field.

use pancake_lab::gauss1d::{LikelihoodRatio, SmoothedDGParams};

fn main() -> pancake_lab::Result<()> {
    let gamma = 6.0;
    for sigma in [1.0, 0.25, 0.05] {
        let lr = LikelihoodRatio::new(SmoothedDGParams::new(gamma, sigma)?)?;
        let s = lr.params().s();
        let peak = (0..=2000)
            .map(|i| lr.score_ratio(-1.0 + 0.001 * i as f64).abs())
            .fold(0.0, f64::max);
        println!("sigma {sigma:5}: max |T'/T| on [-1,1] = {peak:10.3e}   (8 pi/s^2 = {:10.1})", 8.0 * std::f64::consts::PI / (s * s));
        for z in [0.0, 0.02, 0.04, 1.0 / (2.0 * gamma)] {
            let d = lr.derivatives(z);
            println!("    z = {z:.4}  log T = {:11.4e}  T'/T = {:11.4e}  T''/T = {:11.4e}", d.log_ratio, d.score, d.t2_over_t);
        }
    }
    Ok(())
}
