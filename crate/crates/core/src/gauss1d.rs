//! One-dimensional lattice Gaussians.
//!
//! Conventions: ρ_s(x) = exp(-π x²/s²), the reference law Q is N(0, 1/(2π))
//! with density e^{-πz²}, the discrete Gaussian A_γ lives on (1/γ)Z with mass
//! proportional to ρ, and A_γ^σ is the law of (x + σz)/√(1+σ²).

use crate::error::{Error, Result};
use crate::seeding::StreamRng;
use crate::stats::sample_q;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

/// Truncation rule for theta sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSumPolicy {
    /// Half-width of the summation window in units of the component width.
    pub radius_sigmas: f64,
    /// Lattice points always included around the nearest one (odd count).
    pub min_terms: usize,
}

impl Default for ThetaSumPolicy {
    fn default() -> Self {
        Self {
            radius_sigmas: 9.0,
            min_terms: 3,
        }
    }
}

impl ThetaSumPolicy {
    fn side_terms(&self, spacing: f64, width: f64) -> usize {
        let window = (self.radius_sigmas * width / spacing).ceil() as usize + 1;
        window.max(self.min_terms / 2).max(1)
    }
}

/// Parameters (γ, σ) of the smoothed discrete Gaussian A_γ^σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedDGParams {
    gamma: f64,
    sigma: f64,
}

impl SmoothedDGParams {
    pub fn new(gamma: f64, sigma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::domain(format!("gamma must be a finite value > 1, got {gamma}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::domain(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { gamma, sigma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// s = σ/√(1+σ²).
    pub fn s(&self) -> f64 {
        self.sigma / self.stretch()
    }

    /// √(1+σ²).
    pub fn stretch(&self) -> f64 {
        self.sigma.hypot(1.0)
    }

    fn require_smooth(&self) -> Result<()> {
        if self.sigma > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("sigma = 0: the atomic discrete Gaussian has no density ratio"))
        }
    }
}

/// Softmax moments of the coset δZ + shift under ρ_width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosetMoments {
    /// ln ρ_width(δZ + shift).
    pub log_mass: f64,
    /// Mean of the discrete Gaussian on the coset.
    pub mean: f64,
    /// Second raw moment.
    pub second: f64,
    /// Variance, computed without subtracting raw moments.
    pub variance: f64,
}

/// Moments of D_{δZ+shift, width} by a ratio recurrence that starts from the
/// point nearest zero, so no term can overflow or underflow before the sum.
pub fn coset_moments(spacing: f64, shift: f64, width: f64, policy: &ThetaSumPolicy) -> CosetMoments {
    let xc = shift + spacing * (-shift / spacing).round();
    let n = policy.side_terms(spacing, width);
    let w2 = width * width;
    let q = (-2.0 * PI * spacing * spacing / w2).exp();
    let mut sums = [[0.0f64; 3]; 2];
    for (side, dir) in [1.0f64, -1.0].into_iter().enumerate() {
        let mut ratio = (-PI * (2.0 * dir * xc * spacing + spacing * spacing) / w2).exp();
        let mut weight = 1.0;
        let acc = &mut sums[side];
        for j in 1..=n {
            weight *= ratio;
            if weight == 0.0 {
                break;
            }
            let jf = j as f64;
            acc[0] += weight;
            acc[1] += weight * jf;
            acc[2] += weight * jf * jf;
            ratio *= q;
        }
    }
    let [r, l] = sums;
    let m0 = 1.0 + (r[0] + l[0]);
    let m1 = r[1] - l[1];
    let m2 = r[2] + l[2];
    let mj = m1 / m0;
    let var_j = (m2 / m0 - mj * mj).max(0.0);
    let mean = xc + spacing * mj;
    let variance = spacing * spacing * var_j;
    CosetMoments {
        log_mass: -PI * xc * xc / w2 + m0.ln(),
        mean,
        second: variance + mean * mean,
        variance,
    }
}

/// Precomputed sum ρ_width(δZ + shift) for repeated shifts, without moments.
#[derive(Debug, Clone, Copy)]
struct CosetKernel {
    spacing: f64,
    inv_w2: f64,
    half: f64,
    q: f64,
    n: usize,
}

impl CosetKernel {
    fn new(spacing: f64, width: f64, policy: &ThetaSumPolicy) -> Self {
        let inv_w2 = 1.0 / (width * width);
        Self {
            spacing,
            inv_w2,
            half: (-PI * spacing * spacing * inv_w2).exp(),
            q: (-2.0 * PI * spacing * spacing * inv_w2).exp(),
            n: policy.side_terms(spacing, width),
        }
    }

    /// ρ_width(δZ + shift) in linear scale.
    fn mass(&self, shift: f64) -> f64 {
        let xc = shift + self.spacing * (-shift / self.spacing).round();
        let tilt = (-2.0 * PI * xc * self.spacing * self.inv_w2).exp();
        let mut total = 1.0;
        for first in [self.half * tilt, self.half / tilt] {
            let (mut ratio, mut weight) = (first, 1.0);
            for _ in 0..self.n {
                weight *= ratio;
                if weight < 1e-300 {
                    break;
                }
                total += weight;
                ratio *= self.q;
            }
        }
        (-PI * xc * xc * self.inv_w2).exp() * total
    }
}

fn theta_direct(ratio: f64, policy: &ThetaSumPolicy) -> f64 {
    coset_moments(ratio, 0.0, 1.0, policy).log_mass.exp()
}

/// ρ_width(spacing·Z), using the Poisson dual (width/spacing)·ρ_{1/width}((1/spacing)Z)
/// whenever its terms decay faster.
pub fn gaussian_mass(spacing: f64, width: f64, policy: &ThetaSumPolicy) -> Result<f64> {
    if !(spacing.is_finite() && width.is_finite() && spacing > 0.0 && width > 0.0) {
        return Err(Error::domain(format!(
            "gaussian_mass needs finite positive spacing and width, got ({spacing}, {width})"
        )));
    }
    let r = spacing / width;
    Ok(if r < 1.0 {
        theta_direct(1.0 / r, policy) / r
    } else {
        theta_direct(r, policy)
    })
}

/// ln ρ((1/γ)Z), the normaliser of A_γ.
fn log_rho_lattice(gamma: f64, policy: &ThetaSumPolicy) -> f64 {
    gaussian_mass(1.0 / gamma, 1.0, policy)
        .expect("gamma validated upstream")
        .ln()
}

/// ε = 2Σ_{j≥1} exp(-π a² j²).
fn dual_tail(a: f64) -> f64 {
    let mut acc = 0.0;
    for j in 1..64 {
        let t = (-PI * a * a * (j * j) as f64).exp();
        if t == 0.0 {
            break;
        }
        acc += t;
    }
    2.0 * acc
}

/// Likelihood ratio T_γ^σ of A_γ^σ against Q, with its derivative ratios.
#[derive(Debug, Clone)]
pub struct LikelihoodRatio {
    params: SmoothedDGParams,
    policy: ThetaSumPolicy,
    stretch: f64,
    s: f64,
    log_norm: f64,
    score_scale: f64,
    eps: f64,
    kernel: CosetKernel,
    inv_norm: f64,
}

/// Derivative ratios of T at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioDerivatives {
    pub log_ratio: f64,
    /// T′/T.
    pub score: f64,
    /// T″/T.
    pub t2_over_t: f64,
    /// (T′/T)′ = T″/T - (T′/T)².
    pub f_prime: f64,
}

impl LikelihoodRatio {
    pub fn new(params: SmoothedDGParams) -> Result<Self> {
        Self::with_policy(params, ThetaSumPolicy::default())
    }

    pub fn with_policy(params: SmoothedDGParams, policy: ThetaSumPolicy) -> Result<Self> {
        params.require_smooth()?;
        let stretch = params.stretch();
        let s = params.s();
        let log_norm = s.ln() + log_rho_lattice(params.gamma, &policy);
        Ok(Self {
            params,
            policy,
            stretch,
            s,
            log_norm,
            score_scale: 2.0 * PI / (params.sigma * s),
            eps: dual_tail(params.gamma),
            kernel: CosetKernel::new(1.0 / params.gamma, s, &policy),
            inv_norm: (-log_norm).exp(),
        })
    }

    pub fn params(&self) -> SmoothedDGParams {
        self.params
    }

    fn moments(&self, z: f64) -> CosetMoments {
        coset_moments(1.0 / self.params.gamma, -z / self.stretch, self.s, &self.policy)
    }

    pub fn log_ratio(&self, z: f64) -> f64 {
        self.moments(z).log_mass - self.log_norm
    }

    /// T(z) in linear scale; underflows to 0 far from the pancakes.
    pub fn ratio(&self, z: f64) -> f64 {
        if self.kernel.half < 1e-150 {
            // Tilt factors would overflow; only the nearest point matters anyway.
            return self.log_ratio(z).exp();
        }
        self.kernel.mass(-z / self.stretch) * self.inv_norm
    }

    /// T′/T from the mean of the coset discrete Gaussian.
    pub fn score_ratio(&self, z: f64) -> f64 {
        self.score_scale * self.moments(z).mean
    }

    pub fn derivatives(&self, z: f64) -> RatioDerivatives {
        let m = self.moments(z);
        let c = self.score_scale;
        let floor = self.s * self.s / (2.0 * PI);
        RatioDerivatives {
            log_ratio: m.log_mass - self.log_norm,
            score: c * m.mean,
            t2_over_t: c * c * (m.second - floor),
            f_prime: c * c * (m.variance - floor),
        }
    }

    /// T(z) - 1 without cancellation when T is close to one. Uses the dual
    /// cosine series when the smoothed lattice is wide enough.
    pub fn ratio_minus_one(&self, z: f64) -> f64 {
        let width = self.params.gamma * self.s;
        if width < 1.0 {
            return self.log_ratio(z).exp_m1();
        }
        let t = self.params.gamma * z / self.stretch;
        let mut psi = 0.0;
        for j in 1..64 {
            let jf = j as f64;
            let a = (-PI * width * width * jf * jf).exp();
            if a == 0.0 {
                break;
            }
            psi += a * (2.0 * PI * t * jf).cos();
        }
        (2.0 * psi - self.eps) / (1.0 + self.eps)
    }

    /// Density of A_γ^σ, e^{-πz²}·T(z).
    pub fn density(&self, z: f64) -> f64 {
        (self.log_ratio(z) - PI * z * z).exp()
    }
}

/// log T_γ^σ(z).
pub fn log_likelihood_ratio(z: f64, p: &SmoothedDGParams) -> Result<f64> {
    Ok(LikelihoodRatio::new(*p)?.log_ratio(z))
}

/// (T′/T)(z).
pub fn score_ratio(z: f64, p: &SmoothedDGParams) -> Result<f64> {
    Ok(LikelihoodRatio::new(*p)?.score_ratio(z))
}

/// ((T″/T)(z), f′(z)) where f = T′/T.
pub fn curvature_ratio(z: f64, p: &SmoothedDGParams) -> Result<(f64, f64)> {
    let d = LikelihoodRatio::new(*p)?.derivatives(z);
    Ok((d.t2_over_t, d.f_prime))
}

/// Density of A_γ^σ.
pub fn density_smoothed(z: f64, p: &SmoothedDGParams) -> Result<f64> {
    Ok(LikelihoodRatio::new(*p)?.density(z))
}

/// Density of A_γ^σ written as a Gaussian mixture over pancake centres
/// k/(γ√(1+σ²)). Independent of the theta-sum path; used as a cross-check.
pub fn density_mixture(z: f64, p: &SmoothedDGParams) -> Result<f64> {
    p.require_smooth()?;
    let g = p.gamma;
    let b = p.stretch();
    let s = p.s();
    let k_max = (7.0 * g).ceil() as i64;
    let mut norm = 0.0;
    let mut acc = 0.0;
    for k in -k_max..=k_max {
        let x = k as f64 / g;
        let w = (-PI * x * x).exp();
        norm += w;
        let d = (z - x / b) / s;
        acc += w * (-PI * d * d).exp();
    }
    Ok(acc / (norm * s))
}

/// CDF of A_γ^σ (a step function when σ = 0).
pub fn cdf_smoothed(z: f64, p: &SmoothedDGParams) -> f64 {
    let g = p.gamma;
    let b = p.stretch();
    let s = p.s();
    let k_max = (7.0 * g).ceil() as i64;
    let mut norm = 0.0;
    let mut acc = 0.0;
    for k in -k_max..=k_max {
        let x = k as f64 / g;
        let w = (-PI * x * x).exp();
        norm += w;
        let c = x / b;
        acc += w * if s > 0.0 {
            0.5 * erfc(-(z - c) * PI.sqrt() / s)
        } else if z >= c {
            1.0
        } else {
            0.0
        };
    }
    (acc / norm).clamp(0.0, 1.0)
}

/// Exact categorical sampler for A_γ over a window whose omitted mass is
/// below 1e-15.
#[derive(Debug, Clone)]
pub struct DiscreteGaussianSampler {
    gamma: f64,
    k_max: i64,
    index: WeightedIndex<f64>,
}

impl DiscreteGaussianSampler {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::domain(format!("gamma must be finite and positive, got {gamma}")));
        }
        let radius = ((40.0 + (2.0 * gamma).max(1.0).ln()) / PI).sqrt();
        let k_max = (radius * gamma).ceil() as i64;
        let weights = (-k_max..=k_max).map(|k| {
            let x = k as f64 / gamma;
            (-PI * x * x).exp()
        });
        let index = WeightedIndex::new(weights).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(Self { gamma, k_max, index })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Lattice index k of a draw k/γ.
    pub fn sample_index(&self, rng: &mut StreamRng) -> i64 {
        self.index.sample(rng) as i64 - self.k_max
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.sample_index(rng) as f64 / self.gamma
    }
}

/// Sampler for A_γ^σ.
#[derive(Debug, Clone)]
pub struct SmoothedSampler {
    discrete: DiscreteGaussianSampler,
    sigma: f64,
    scale: f64,
}

impl SmoothedSampler {
    pub fn new(p: &SmoothedDGParams) -> Result<Self> {
        Ok(Self {
            discrete: DiscreteGaussianSampler::new(p.gamma)?,
            sigma: p.sigma,
            scale: 1.0 / p.stretch(),
        })
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        let x = self.discrete.sample(rng);
        let z = sample_q(rng);
        (x + self.sigma * z) * self.scale
    }
}

/// One draw from A_γ.
pub fn sample_discrete(gamma: f64, rng: &mut StreamRng) -> Result<f64> {
    Ok(DiscreteGaussianSampler::new(gamma)?.sample(rng))
}

/// One draw from A_γ^σ.
pub fn sample_smoothed(p: &SmoothedDGParams, rng: &mut StreamRng) -> Result<f64> {
    Ok(SmoothedSampler::new(p)?.sample(rng))
}

/// σ(t) = √(e^{2t}(1+σ0²) - 1): the thickness reached by running the OU
/// process for time t from A_γ^{σ0}.
pub fn forward_sigma(sigma0: f64, t: f64) -> f64 {
    ((2.0 * t).exp_m1() * (1.0 + sigma0 * sigma0) + sigma0 * sigma0).sqrt()
}

/// Periodic Gaussian density Ψ_{Z,s}(z) = ρ_s(Z - z)/s on the unit torus.
pub fn periodic_gaussian(z: f64, s: f64) -> Result<f64> {
    if !(s.is_finite() && s > 0.0 && z.is_finite()) {
        return Err(Error::domain(format!("periodic_gaussian needs finite z and s > 0, got ({z}, {s})")));
    }
    let frac = z - z.floor();
    let m = coset_moments(1.0, -frac, s, &ThetaSumPolicy::default());
    Ok((m.log_mass - s.ln()).exp())
}

/// E_{A_γ}[x²] = 1/(2π) - (γ/ρ((1/γ)Z))·Σ_{y∈γZ} y²ρ(y).
pub fn discrete_second_moment(gamma: f64) -> f64 {
    1.0 / (2.0 * PI) - discrete_second_moment_deficit(gamma)
}

/// 1/(2π) - E[x²] for x ∼ A_γ, computed directly so its sign is exact.
pub fn discrete_second_moment_deficit(gamma: f64) -> f64 {
    let policy = ThetaSumPolicy::default();
    let norm = gaussian_mass(1.0 / gamma, 1.0, &policy).expect("gamma > 0");
    let mut acc = 0.0;
    for j in 1..64 {
        let y = gamma * j as f64;
        let t = y * y * (-PI * y * y).exp();
        if t == 0.0 && j > 1 {
            break;
        }
        acc += 2.0 * t;
    }
    gamma * acc / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{q_expectation, PanelRule};
    use crate::seeding;
    use crate::stats::{ks_critical, ks_statistic, MeanEstimate};
    use proptest::prelude::*;

    fn p(g: f64, s: f64) -> SmoothedDGParams {
        SmoothedDGParams::new(g, s).unwrap()
    }

    #[test]
    fn rejects_out_of_regime_parameters() {
        assert!(SmoothedDGParams::new(1.0, 0.1).is_err());
        assert!(SmoothedDGParams::new(f64::NAN, 0.1).is_err());
        assert!(SmoothedDGParams::new(2.0, -0.1).is_err());
        assert!(log_likelihood_ratio(0.0, &p(2.0, 0.0)).is_err());
        assert!(score_ratio(0.0, &p(2.0, 0.0)).is_err());
        assert!(density_smoothed(0.0, &p(2.0, 0.0)).is_err());
        assert!(gaussian_mass(f64::INFINITY, 1.0, &ThetaSumPolicy::default()).is_err());
    }

    #[test]
    fn gaussian_mass_examples() {
        let pol = ThetaSumPolicy::default();
        let direct: f64 = (-20i32..=20).map(|k| (-PI * (k * k) as f64).exp()).sum();
        let m = gaussian_mass(1.0, 1.0, &pol).unwrap();
        assert!((m - direct).abs() < 1e-12);
        assert!((m - 1.086_434_811_213_308).abs() < 1e-12);
        assert_eq!(gaussian_mass(100.0, 1.0, &pol).unwrap(), 1.0);
        let fine = gaussian_mass(1.0 / 6.0, 1.0, &pol).unwrap();
        let coarse = gaussian_mass(6.0, 1.0, &pol).unwrap();
        assert!((fine - 6.0 * coarse).abs() < 1e-12 * fine);
    }

    #[test]
    fn poisson_duality_on_log_grid() {
        let pol = ThetaSumPolicy::default();
        for i in 0..=10 {
            for j in 0..=10 {
                let c = 10f64.powf(-1.0 + 0.2 * i as f64);
                let s = 10f64.powf(-1.0 + 0.2 * j as f64);
                let lhs = gaussian_mass(c, s, &pol).unwrap();
                let primal = theta_direct(c / s, &pol);
                let rhs = (s / c) * gaussian_mass(1.0 / c, 1.0 / s, &pol).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs, "c={c} s={s}");
                assert!((lhs - primal).abs() <= 1e-12 * lhs, "c={c} s={s}");
            }
        }
    }

    #[test]
    fn log_ratio_matches_extended_precision_oracle() {
        // Brute-force sums over |k| <= 200 at 50 digits.
        let lr = LikelihoodRatio::new(p(6.0, 0.05)).unwrap();
        let cases = [
            (0.5, 1.204_730_983_208_359_3),
            (0.0, 1.205_221_244_425_230_9),
            (1.3, -0.334_067_640_262_862_06),
        ];
        for (z, want) in cases {
            let got = lr.log_ratio(z);
            assert!((got - want).abs() <= 1e-10 * want.abs(), "z={z}: {got} vs {want}");
        }
        let mid = lr.log_ratio(1.0 / 12.0);
        assert!((mid + 6.849_869_808_368_229).abs() < 1e-9, "{mid}");
    }

    #[test]
    fn log_ratio_finite_far_from_pancakes_at_tiny_sigma() {
        let lr = LikelihoodRatio::new(p(6.0, 1e-4)).unwrap();
        for i in 0..200 {
            let z = -3.0 + 0.0301 * i as f64;
            let v = lr.log_ratio(z);
            assert!(v.is_finite(), "z={z}");
            assert!(lr.score_ratio(z).is_finite());
        }
        assert!(lr.log_ratio(1.0 / 12.0) < -1e6);
    }

    #[test]
    fn ratio_has_unit_mean_under_q() {
        let rule = PanelRule::new(16);
        for &(g, s) in &[(2.0, 0.3), (6.0, 0.05), (3.0, 1.0)] {
            let lr = LikelihoodRatio::new(p(g, s)).unwrap();
            let width = (p(g, s).s() / g / 8.0).min(0.05);
            let mean = q_expectation(&rule, 6.0, width, |z| lr.ratio(z));
            assert!((mean - 1.0).abs() < 1e-9, "g={g} s={s}: {mean}");
        }
    }

    #[test]
    fn ratio_minus_one_agrees_with_log_form() {
        for &(g, s) in &[(2.0, 1.0), (3.0, 1.0), (1.5, 2.0), (6.0, 0.25)] {
            let lr = LikelihoodRatio::new(p(g, s)).unwrap();
            for i in 0..50 {
                let z = -2.0 + 0.08 * i as f64;
                let a = lr.ratio_minus_one(z);
                let b = lr.log_ratio(z).exp_m1();
                assert!((a - b).abs() < 1e-13 + 1e-11 * b.abs(), "g={g} s={s} z={z}: {a} {b}");
            }
        }
    }

    #[test]
    fn score_ratio_examples() {
        for &(g, s) in &[(1.5, 0.05), (3.0, 0.25), (6.0, 1.0), (4.0, 0.005)] {
            let pp = p(g, s);
            let lr = LikelihoodRatio::new(pp).unwrap();
            assert_eq!(lr.score_ratio(0.0), 0.0);
            let bound = 8.0 * PI / (pp.s() * pp.s());
            for i in 0..4001 {
                let z = -3.0 + 6.0 * i as f64 / 4000.0;
                assert!(lr.score_ratio(z).abs() <= bound);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &(g, s) in &[(2.0, 0.3), (6.0, 0.25), (3.0, 1.0), (4.0, 0.1)] {
            let lr = LikelihoodRatio::new(p(g, s)).unwrap();
            let h = 1e-6;
            for i in 0..40 {
                let z = -1.5 + 0.0761 * i as f64;
                let fd = (lr.log_ratio(z + h) - lr.log_ratio(z - h)) / (2.0 * h);
                let sc = lr.score_ratio(z);
                assert!((fd - sc).abs() <= 1e-5 * sc.abs().max(1.0), "g={g} s={s} z={z}: {fd} {sc}");
                let hs = 1e-5 * p(g, s).s();
                let fd2 = (lr.score_ratio(z + hs) - lr.score_ratio(z - hs)) / (2.0 * hs);
                let d = lr.derivatives(z);
                assert!((fd2 - d.f_prime).abs() <= 1e-4 * d.f_prime.abs().max(1.0), "g={g} s={s} z={z}: {fd2} {}", d.f_prime);
                assert!((d.t2_over_t - d.f_prime - d.score * d.score).abs() <= 1e-9 * d.t2_over_t.abs().max(1.0));
            }
        }
    }

    #[test]
    fn curvature_bounds() {
        for &(g, s) in &[(1.5, 0.05), (3.0, 0.25), (6.0, 1.0)] {
            let pp = p(g, s);
            let lr = LikelihoodRatio::new(pp).unwrap();
            let sv = pp.s();
            let bound = 100.0 * PI * PI / sv.powi(4);
            for i in 0..2001 {
                let z = -2.0 + 4.0 * i as f64 / 2000.0;
                assert!(lr.derivatives(z).f_prime.abs() <= bound);
            }
            let c = 2.0 * PI / (pp.sigma() * sv);
            let (t2, _) = curvature_ratio(0.0, &pp).unwrap();
            assert!(t2 >= -c * c * sv * sv / (2.0 * PI) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn eq5_and_mixture_forms_agree() {
        for &(g, s) in &[(2.0, 0.3), (6.0, 0.25), (3.0, 1.0), (6.0, 0.05)] {
            let pp = p(g, s);
            for i in 0..121 {
                let z = -1.5 + 0.025 * i as f64;
                let a = density_smoothed(z, &pp).unwrap();
                let b = density_mixture(z, &pp).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.max(1e-300), "g={g} s={s} z={z}: {a} {b}");
            }
        }
    }

    #[test]
    fn density_normalises_and_cdf_is_consistent() {
        let rule = PanelRule::new(16);
        let pp = p(6.0, 0.25);
        let lr = LikelihoodRatio::new(pp).unwrap();
        let total = rule.uniform(-6.0, 6.0, 2400, |z| lr.density(z));
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        let part = rule.uniform(-6.0, 0.3, 1260, |z| lr.density(z));
        assert!((part - cdf_smoothed(0.3, &pp)).abs() < 1e-9);
    }

    #[test]
    fn discrete_sampler_moments_and_lattice() {
        let gamma = 2.5;
        let sampler = DiscreteGaussianSampler::new(gamma).unwrap();
        let mut rng = seeding::stream(11, &[0]);
        let n = 1_000_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let k = sampler.sample_index(&mut rng);
            let x = k as f64 / gamma;
            let back = x * gamma;
            assert!((back - back.round()).abs() <= 1e-12 * (k.abs() as f64).max(1.0));
            xs.push(x);
        }
        let m = MeanEstimate::from_slice(&xs);
        assert!(m.within(0.0, 4.0), "{m:?}");
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let m2 = MeanEstimate::from_slice(&sq);
        assert!(m2.within(discrete_second_moment(gamma), 4.0), "{m2:?}");
    }

    #[test]
    fn smoothed_sampler_passes_ks() {
        let pp = p(4.0, 0.1);
        let sampler = SmoothedSampler::new(&pp).unwrap();
        let mut rng = seeding::stream(12, &[0]);
        let xs: Vec<f64> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
        let d = ks_statistic(&xs, |z| cdf_smoothed(z, &pp));
        assert!(d < ks_critical(xs.len(), 0.01), "{d}");
    }

    #[test]
    fn forward_sigma_examples() {
        assert_eq!(forward_sigma(0.3, 0.0), 0.3);
        let sigma: f64 = 0.7;
        let t = sigma.hypot(1.0).ln();
        assert!((forward_sigma(0.0, t) - sigma).abs() < 1e-14);
    }

    #[test]
    fn ou_evolution_lands_on_forward_sigma() {
        let pp = p(4.0, 0.05);
        let t = 0.3;
        let target = p(4.0, forward_sigma(0.05, t));
        let sampler = SmoothedSampler::new(&pp).unwrap();
        let mut rng = seeding::stream(13, &[0]);
        let (a, b) = ((-t).exp(), (-(2.0 * t)).exp_m1().abs().sqrt());
        let xs: Vec<f64> = (0..100_000)
            .map(|_| a * sampler.sample(&mut rng) + b * sample_q(&mut rng))
            .collect();
        let d = ks_statistic(&xs, |z| cdf_smoothed(z, &target));
        assert!(d < ks_critical(xs.len(), 0.01), "{d}");
    }

    #[test]
    fn periodic_gaussian_bounds_and_normalisation() {
        let rule = PanelRule::new(16);
        for s in [1.0f64, 2.0] {
            let bound = 2.0 * (1.0 + 1.0 / (PI * s)) * (-PI * s * s).exp();
            for i in 0..200 {
                let z = -1.0 + 0.01 * i as f64;
                let v = periodic_gaussian(z, s).unwrap();
                assert!((v - 1.0).abs() <= bound);
                let shifted = periodic_gaussian(z + 1.0, s).unwrap();
                assert!((v - shifted).abs() <= 1e-13);
            }
            let total = rule.uniform(0.0, 1.0, 16, |z| periodic_gaussian(z, s).unwrap());
            assert!((total - 1.0).abs() < 1e-9);
        }
        let narrow = rule.uniform(0.0, 1.0, 200, |z| periodic_gaussian(z, 0.05).unwrap());
        assert!((narrow - 1.0).abs() < 1e-9);
    }

    fn coset_direct(gamma: f64, t: f64, s: f64, keep: impl Fn(f64) -> bool) -> f64 {
        (-4000i64..=4000)
            .map(|k| k as f64 / gamma - t)
            .filter(|&x| keep(x))
            .map(|x| (-PI * x * x / (s * s)).exp())
            .sum()
    }

    #[test]
    fn banaszczyk_tail_in_one_dimension() {
        for gamma in [1.5, 3.0, 6.0] {
            for s in [0.3, 1.0, 2.0] {
                let total = coset_direct(gamma, 0.0, s, |_| true);
                for t in [0.0, 0.1, 0.37, 1.0 / (2.0 * gamma)] {
                    for mult in [1.0f64, 1.5, 2.5] {
                        let r = mult * s;
                        assert!(r > s * (1.0 / (2.0 * PI)).sqrt());
                        let outside = coset_direct(gamma, t, s, |x| x.abs() > r);
                        let bound = (-PI * (r / s - (1.0 / (2.0 * PI)).sqrt()).powi(2)).exp() * total;
                        assert!(outside < bound, "g={gamma} s={s} t={t} r={r}");
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_sandwich() {
        let pol = ThetaSumPolicy::default();
        for gamma in [1.5, 3.0, 6.0] {
            for s in [0.1, 0.5, 1.0] {
                let full = coset_moments(1.0 / gamma, 0.0, s, &pol).log_mass;
                for i in 0..50 {
                    let t = 0.013 * i as f64;
                    let shifted = coset_moments(1.0 / gamma, -t, s, &pol).log_mass;
                    let k = (t * gamma).round();
                    let dist = (t - k / gamma).abs();
                    assert!(shifted <= full + 1e-14);
                    assert!(-PI * dist * dist / (s * s) + full <= shifted + 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_ratio_matches_log_ratio() {
        for &(g, s) in &[(4.0, 0.141), (2.0, 0.3), (6.0, 0.05), (3.0, 2.0), (6.0, 1e-4)] {
            let lr = LikelihoodRatio::new(p(g, s)).unwrap();
            for i in 0..400 {
                let z = -3.0 + 0.01537 * i as f64;
                let a = lr.ratio(z);
                let b = lr.log_ratio(z).exp();
                assert!((a - b).abs() <= 1e-13 * b.max(1e-290), "g={g} s={s} z={z}: {a} {b}");
            }
        }
    }

    #[test]
    fn evaluators_are_deterministic() {
        let lr = LikelihoodRatio::new(p(3.0, 0.2)).unwrap();
        let a = lr.derivatives(0.123);
        let b = LikelihoodRatio::new(p(3.0, 0.2)).unwrap().derivatives(0.123);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn log_ratio_is_even(z in -5.0f64..5.0, g in 1.1f64..8.0, s in 0.01f64..3.0) {
            let lr = LikelihoodRatio::new(p(g, s)).unwrap();
            let (a, b) = (lr.log_ratio(z), lr.log_ratio(-z));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            prop_assert!((lr.score_ratio(z) + lr.score_ratio(-z)).abs() <= 1e-9 * lr.score_ratio(z).abs().max(1.0));
        }

        #[test]
        fn score_ratio_uniformly_bounded(z in -5.0f64..5.0, g in 1.1f64..8.0, s in 0.01f64..3.0) {
            let pp = p(g, s);
            let bound = 8.0 * PI / (pp.s() * pp.s());
            prop_assert!(LikelihoodRatio::new(pp).unwrap().score_ratio(z).abs() <= bound);
        }

        #[test]
        fn forward_sigma_semigroup(s0 in 0.0f64..3.0, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let a = forward_sigma(forward_sigma(s0, t1), t2);
            let b = forward_sigma(s0, t1 + t2);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }
}
