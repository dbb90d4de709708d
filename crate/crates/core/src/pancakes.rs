//! Gaussian pancakes in R^d: A_γ^σ along a hidden unit direction u, standard
//! (variance 1/(2π)) Gaussian in the orthogonal complement.

use crate::error::{Error, Result};
use crate::gauss1d::{discrete_second_moment_deficit, forward_sigma, LikelihoodRatio, SmoothedDGParams, SmoothedSampler};
use crate::seeding::StreamRng;
use crate::stats::sample_q;
use ndarray::{Array1, Array2, ArrayView1};
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct PancakeParams {
    line: SmoothedDGParams,
    u: Array1<f64>,
    ratio: Option<LikelihoodRatio>,
}

impl PancakeParams {
    /// `u` must have unit norm to within 1e-6; it is renormalised exactly.
    pub fn new(gamma: f64, sigma: f64, u: Array1<f64>) -> Result<Self> {
        let line = SmoothedDGParams::new(gamma, sigma)?;
        if u.is_empty() {
            return Err(Error::domain("direction must have dimension >= 1"));
        }
        let norm = u.dot(&u).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!("direction must be a unit vector, got norm {norm}")));
        }
        let u = u / norm;
        let ratio = if sigma > 0.0 { Some(LikelihoodRatio::new(line)?) } else { None };
        Ok(Self { line, u, ratio })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn gamma(&self) -> f64 {
        self.line.gamma()
    }

    pub fn sigma(&self) -> f64 {
        self.line.sigma()
    }

    pub fn s(&self) -> f64 {
        self.line.s()
    }

    pub fn direction(&self) -> ArrayView1<'_, f64> {
        self.u.view()
    }

    pub fn line(&self) -> SmoothedDGParams {
        self.line
    }

    /// ζ = γ/√(1+σ²): spacing of the pancake centres' reciprocal.
    pub fn zeta(&self) -> f64 {
        self.gamma() / self.line.stretch()
    }

    /// β = σγ/√(1+σ²) in the alternative (ζ, β) parametrisation.
    pub fn beta_prev(&self) -> f64 {
        self.sigma() * self.zeta()
    }

    /// Likelihood ratio along u; an error when σ = 0.
    pub fn ratio(&self) -> Result<&LikelihoodRatio> {
        self.ratio
            .as_ref()
            .ok_or_else(|| Error::domain("sigma = 0: pancakes have no density"))
    }

    /// n i.i.d. rows x = y·u + (I - uuᵀ)g.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Result<Array2<f64>> {
        let sampler = SmoothedSampler::new(&self.line)?;
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for mut row in out.rows_mut() {
            for v in row.iter_mut() {
                *v = sample_q(rng);
            }
            let y = sampler.sample(rng);
            let along = row.dot(&self.u);
            row.scaled_add(y - along, &self.u);
        }
        Ok(out)
    }

    pub fn log_density(&self, x: ArrayView1<f64>) -> Result<f64> {
        let lr = self.ratio()?;
        Ok(-PI * x.dot(&x) + lr.log_ratio(x.dot(&self.u)))
    }

    /// ∇log P(x) = -2πx + (T′/T)(⟨x,u⟩)·u.
    pub fn score(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let lr = self.ratio()?;
        let f = lr.score_ratio(x.dot(&self.u));
        let mut out = x.to_owned() * (-2.0 * PI);
        out.scaled_add(f, &self.u);
        Ok(out)
    }

    /// Parameters of the OU process run for time t from this distribution.
    pub fn forward_params(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(self.clone());
        }
        Self::new(self.gamma(), forward_sigma(self.sigma(), t), self.u.clone())
    }

    /// E‖x‖².
    pub fn second_moment(&self) -> f64 {
        second_moment_exact_1d(self.gamma(), self.sigma()) + (self.dim() - 1) as f64 / (2.0 * PI)
    }

    /// Certified Lipschitz constant 2π + 100π²/s⁴ of the score.
    pub fn lipschitz_bound(&self) -> Result<f64> {
        self.ratio()?;
        Ok(2.0 * PI + 100.0 * PI * PI / self.s().powi(4))
    }
}

/// E[y²] for y ∼ A_γ^σ.
pub fn second_moment_exact_1d(gamma: f64, sigma: f64) -> f64 {
    1.0 / (2.0 * PI) - second_moment_deficit_1d(gamma, sigma)
}

/// 1/(2π) - E[y²] for y ∼ A_γ^σ; nonnegative.
pub fn second_moment_deficit_1d(gamma: f64, sigma: f64) -> f64 {
    discrete_second_moment_deficit(gamma) / (1.0 + sigma * sigma)
}

/// The direction (-1, 1, 0, ..., 0)/√2 for d ≥ 2 and e₁ for d = 1.
pub fn default_direction(d: usize) -> Array1<f64> {
    let mut u = Array1::zeros(d.max(1));
    if d >= 2 {
        u[0] = -std::f64::consts::FRAC_1_SQRT_2;
        u[1] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        u[0] = 1.0;
    }
    u
}

/// A uniformly random unit vector.
pub fn random_direction(d: usize, rng: &mut StreamRng) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..d).map(|_| sample_q(rng)).collect();
        let n = v.dot(&v).sqrt();
        if n > 1e-12 {
            return v / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss1d::{cdf_smoothed, density_mixture};
    use crate::quad::PanelRule;
    use crate::seeding;
    use crate::stats::{ks_critical, ks_statistic, q_cdf, MeanEstimate};
    use ndarray::array;

    fn fig1(sigma: f64) -> PancakeParams {
        PancakeParams::new(6.0, sigma, default_direction(2)).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(PancakeParams::new(4.0, 0.1, array![1.0, 1.0]).is_err());
        assert!(PancakeParams::new(4.0, 0.1, array![0.6, 0.8 + 1e-9]).is_ok());
        let p = PancakeParams::new(4.0, 0.0, array![1.0]).unwrap();
        assert!(p.log_density(array![0.0].view()).is_err());
        assert!(p.score(array![0.0].view()).is_err());
        assert!(p.lipschitz_bound().is_err());
        let p = fig1(0.25);
        assert!((p.zeta() - 6.0 / 0.25f64.hypot(1.0)).abs() < 1e-15);
        assert!((p.beta_prev() - 0.25 * p.zeta()).abs() < 1e-15);
        let u = p.direction();
        assert!((u.dot(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projections_have_the_right_laws() {
        let p = fig1(0.25);
        let mut rng = seeding::stream(3, &[0]);
        let xs = p.sample(100_000, &mut rng).unwrap();
        let along: Vec<f64> = xs.rows().into_iter().map(|r| r.dot(&p.direction())).collect();
        let d = ks_statistic(&along, |z| cdf_smoothed(z, &p.line()));
        assert!(d < ks_critical(along.len(), 0.01), "{d}");
        let w = array![std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
        let perp: Vec<f64> = xs.rows().into_iter().map(|r| r.dot(&w)).collect();
        let d = ks_statistic(&perp, q_cdf);
        assert!(d < ks_critical(perp.len(), 0.01), "{d}");
    }

    #[test]
    fn spacing_six_scatter_is_banded() {
        // Projections cluster within a few s of the centres k/(γ√(1+σ²)).
        let p = fig1(0.01);
        let mut rng = seeding::stream(4, &[0]);
        let xs = p.sample(10_000, &mut rng).unwrap();
        let period = 1.0 / p.zeta();
        for r in xs.rows() {
            let z = r.dot(&p.direction());
            let off = z - period * (z / period).round();
            assert!(off.abs() < 6.0 * p.s());
        }
    }

    #[test]
    fn density_normalises_in_one_and_two_dimensions() {
        let rule = PanelRule::new(16);
        let p1 = PancakeParams::new(6.0, 0.25, array![1.0]).unwrap();
        let one = rule.uniform(-5.0, 5.0, 400, |z| p1.log_density(array![z].view()).unwrap().exp());
        assert!((one - 1.0).abs() < 1e-6, "{one}");
        let p2 = fig1(0.25);
        let nodes = rule.composite_nodes(-5.0, 5.0, 200);
        let mut total = 0.0;
        for &(x, wx) in &nodes {
            for &(y, wy) in &nodes {
                total += wx * wy * p2.log_density(array![x, y].view()).unwrap().exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn density_profile_along_u_matches_mixture() {
        let p = fig1(0.25);
        let u = p.direction().to_owned();
        for i in 0..101 {
            let z = -1.0 + 0.02 * i as f64;
            let x = &u * z;
            let got = p.log_density(x.view()).unwrap().exp();
            let want = density_mixture(z, &p.line()).unwrap();
            assert!((got - want).abs() <= 1e-8 * want.max(1e-300), "z={z}");
        }
    }

    #[test]
    fn orthogonal_shifts_only_move_the_quadratic_term() {
        let p = fig1(0.25);
        let x = array![0.3, -0.1];
        let w = array![0.5, 0.5];
        let a = p.log_density(x.view()).unwrap();
        let b = p.log_density((&x + &w).view()).unwrap();
        let quad = -PI * ((&x + &w).dot(&(&x + &w)) - x.dot(&x));
        assert!((b - a - quad).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let p = PancakeParams::new(4.0, 0.2, {
            let v: Array1<f64> = array![1.0, -2.0, 0.5, 3.0];
            let n = v.dot(&v).sqrt();
            v / n
        })
        .unwrap();
        let zero = p.score(Array1::zeros(4).view()).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let mut rng = seeding::stream(5, &[0]);
        let u = p.direction().to_owned();
        for _ in 0..50 {
            let x: Array1<f64> = (0..4).map(|_| 2.0 * sample_q(&mut rng)).collect();
            let s = p.score(x.view()).unwrap();
            let resid = &s + &(&x * (2.0 * PI));
            let along = resid.dot(&u);
            let cross = &resid - &(&u * along);
            assert!(cross.iter().all(|c| c.abs() < 1e-12));
            let h = 1e-6;
            for i in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.log_density(xp.view()).unwrap() - p.log_density(xm.view()).unwrap()) / (2.0 * h);
                assert!((fd - s[i]).abs() <= 1e-5 * s[i].abs().max(1.0), "{fd} vs {}", s[i]);
            }
        }
    }

    #[test]
    fn forward_params_semigroup() {
        let p = fig1(0.05);
        assert_eq!(p.forward_params(0.0).unwrap().sigma(), 0.05);
        let a = p.forward_params(0.2).unwrap().forward_params(0.3).unwrap();
        let b = p.forward_params(0.5).unwrap();
        assert!((a.sigma() - b.sigma()).abs() < 1e-12);
        assert_eq!(a.direction(), b.direction());
        assert!(p.forward_params(-1.0).is_err());
    }

    #[test]
    fn ou_evolved_samples_match_forward_params() {
        let p = PancakeParams::new(4.0, 0.05, default_direction(3)).unwrap();
        let t = 0.3;
        let mut rng = seeding::stream(6, &[0]);
        let xs = p.sample(50_000, &mut rng).unwrap();
        let (a, b) = ((-t as f64).exp(), (-(2.0 * t as f64)).exp_m1().abs().sqrt());
        let u = p.direction();
        let evolved: Vec<f64> = xs
            .rows()
            .into_iter()
            .map(|r| {
                let noise: Array1<f64> = (0..3).map(|_| sample_q(&mut rng)).collect();
                (&r * a + &noise * b).dot(&u)
            })
            .collect();
        let q = p.forward_params(t).unwrap();
        let direct = q.sample(50_000, &mut rng).unwrap();
        let proj: Vec<f64> = direct.rows().into_iter().map(|r| r.dot(&u)).collect();
        let d = crate::stats::ks_two_sample(&evolved, &proj);
        assert!(d < crate::stats::ks_critical_two_sample(50_000, 50_000, 0.01), "{d}");
    }

    #[test]
    fn second_moment_properties() {
        for g in [1.5, 3.0, 6.0] {
            for s in [0.0, 0.005, 0.05, 0.25, 1.0, 4.0] {
                for d in [1usize, 2, 16] {
                    let p = PancakeParams::new(g, s, default_direction(d)).unwrap();
                    assert!(p.second_moment() <= d as f64 / (2.0 * PI) + 1e-15);
                }
            }
        }
        let far = second_moment_exact_1d(2.0, 1e4);
        assert!((far - 1.0 / (2.0 * PI)).abs() < 1e-8);
    }

    #[test]
    fn second_moment_matches_monte_carlo() {
        let p = PancakeParams::new(1.5, 0.25, default_direction(2)).unwrap();
        let mut rng = seeding::stream(7, &[0]);
        let xs = p.sample(1_000_000, &mut rng).unwrap();
        let sq: Vec<f64> = xs.rows().into_iter().map(|r| r.dot(&r)).collect();
        let m = MeanEstimate::from_slice(&sq);
        assert!(m.within(p.second_moment(), 4.0), "{m:?} vs {}", p.second_moment());
    }

    #[test]
    fn lipschitz_bound_examples() {
        let p = PancakeParams::new(4.0, 1.0, array![1.0]).unwrap();
        let b = p.lipschitz_bound().unwrap();
        assert!((b - (2.0 * PI + 400.0 * PI * PI)).abs() < 1e-9 * b);
        let mut prev = f64::INFINITY;
        for s in [0.05, 0.1, 0.5, 1.0, 2.0] {
            let b = PancakeParams::new(4.0, s, array![1.0]).unwrap().lipschitz_bound().unwrap();
            assert!(b < prev);
            prev = b;
        }
        let p = PancakeParams::new(3.0, 0.25, default_direction(3)).unwrap();
        let bound = p.lipschitz_bound().unwrap();
        let mut rng = seeding::stream(8, &[0]);
        for _ in 0..2000 {
            let x: Array1<f64> = (0..3).map(|_| sample_q(&mut rng)).collect();
            let y: Array1<f64> = &x + &(0..3).map(|_| 0.01 * sample_q(&mut rng)).collect::<Array1<f64>>();
            let ds = &p.score(x.view()).unwrap() - &p.score(y.view()).unwrap();
            let dx = &x - &y;
            assert!(ds.dot(&ds).sqrt() <= bound * dx.dot(&dx).sqrt());
        }
    }

    #[test]
    fn rotational_covariance() {
        let u = default_direction(2);
        let ru = array![u[1], -u[0]];
        let a = PancakeParams::new(4.0, 0.1, u.clone()).unwrap();
        let b = PancakeParams::new(4.0, 0.1, ru.clone()).unwrap();
        let mut rng = seeding::stream(9, &[0]);
        let xa = a.sample(30_000, &mut rng).unwrap();
        let xb = b.sample(30_000, &mut rng).unwrap();
        // R maps u to Ru; compare projections of R·xa and xb onto Ru and onto a fixed axis.
        for w in [ru.clone(), array![1.0, 0.0]] {
            let pa: Vec<f64> = xa.rows().into_iter().map(|r| array![r[1], -r[0]].dot(&w)).collect();
            let pb: Vec<f64> = xb.rows().into_iter().map(|r| r.dot(&w)).collect();
            let d = crate::stats::ks_two_sample(&pa, &pb);
            assert!(d < crate::stats::ks_critical_two_sample(30_000, 30_000, 0.01), "{d}");
        }
    }

    #[test]
    fn score_has_zero_mean() {
        let p = PancakeParams::new(3.0, 0.3, default_direction(2)).unwrap();
        let mut rng = seeding::stream(10, &[0]);
        let xs = p.sample(200_000, &mut rng).unwrap();
        for i in 0..2 {
            let comp: Vec<f64> = xs.rows().into_iter().map(|r| p.score(r).unwrap()[i]).collect();
            let m = MeanEstimate::from_slice(&comp);
            assert!(m.within(0.0, 4.0), "{m:?}");
        }
    }
}
