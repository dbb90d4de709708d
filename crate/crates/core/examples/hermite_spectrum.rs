//! Hermite coefficients of the discrete Gaussian. Low degrees are tiny, the
//! mass sits near degree 2πγ².

use pancake_lab::hermite::{rounded_degree_bound, AlphaTable};

fn main() -> pancake_lab::Result<()> {
    for gamma in [1.5, 2.0, 3.0] {
        let t = AlphaTable::new(gamma, 120)?;
        let (k, bound) = rounded_degree_bound(gamma);
        let peak = (2..=120).step_by(2).max_by(|&a, &b| t.get(a).unwrap().abs().total_cmp(&t.get(b).unwrap().abs())).unwrap();
        println!("gamma {gamma}: |alpha_2| = {:.2e}, largest at k = {peak}, |alpha_{k}| = {:.4} >= {bound:.4}", t.get(2).unwrap().abs(), t.get(k).unwrap().abs());
        let row: Vec<String> = (0..=40).step_by(4).map(|j| format!("{:+.3}", t.get(j).unwrap())).collect();
        println!("    alpha_0,4,..,40: {}", row.join(" "));
    }
    Ok(())
}
