//! 2-D pancakes at spacing 6: scatter points and the density along u as CSV.
//!
//!     cargo run --release --example pancake_scatter > scatter.csv

use pancake_lab::pancakes::{default_direction, PancakeParams};
use pancake_lab::seeding;

fn main() -> pancake_lab::Result<()> {
    let p = PancakeParams::new(6.0, 0.25, default_direction(2))?;
    let xs = p.sample(5000, &mut seeding::stream(7, &[1]))?;
    println!("kind,a,b");
    for r in xs.rows() {
        println!("point,{},{}", r[0], r[1]);
    }
    let lr = p.ratio()?;
    for i in 0..=400 {
        let z = -2.0 + 0.01 * i as f64;
        println!("density,{z},{}", lr.density(z));
    }
    Ok(())
}
