//! Hermite polynomials orthonormal under e^{-πx²}, and the Hermite spectrum of
//! the pancake likelihood ratio.
//!
//! With H_{k+1} = 2πx·H_k - 2πk·H_{k-1} (H_0 = 1, H_1 = 2πx), the normalised
//! h_k = c_k·H_k uses c_k = 1/√((2π)^k k!); orthonormality fixes this choice.

use crate::error::{Error, Result};
use crate::gauss1d::{gaussian_mass, LikelihoodRatio, SmoothedDGParams, ThetaSumPolicy};
use crate::quad::{periodic_breaks, PanelRule};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Normalised Hermite basis up to degree K.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    max_degree: usize,
    log_c: Vec<f64>,
}

impl HermiteBasis {
    pub fn new(max_degree: usize) -> Self {
        let log_c = log_factorials(max_degree)
            .iter()
            .enumerate()
            .map(|(k, lf)| -0.5 * (k as f64 * (2.0 * PI).ln() + lf))
            .collect();
        Self { max_degree, log_c }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// c_k.
    pub fn normalisation(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        Ok(self.log_c[k].exp())
    }

    fn check(&self, k: usize) -> Result<()> {
        if k > self.max_degree {
            Err(Error::domain(format!("degree {k} above the basis maximum {}", self.max_degree)))
        } else {
            Ok(())
        }
    }

    /// h_k(x).
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        self.check(k)?;
        Ok(hermite_all(k, x)[k])
    }

    /// h_0(x), ..., h_K(x).
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        hermite_all(self.max_degree, x)
    }
}

/// ln 0!, ..., ln n!.
pub fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// h_0(x), ..., h_n(x) by the normalised three-term recurrence.
pub fn hermite_all(n: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n == 0 {
        return h;
    }
    let a = (2.0 * PI).sqrt() * x;
    h.push(a);
    for k in 1..n {
        let kf = k as f64;
        let next = (a * h[k] - kf.sqrt() * h[k - 1]) / (kf + 1.0).sqrt();
        h.push(next);
    }
    h
}

/// Normalised h_k(x).
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    hermite_all(k, x)[k]
}

/// Unnormalised H_k(x); only sensible for small k.
pub fn hermite_unnormalised(k: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * PI * x);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let next = 2.0 * PI * x * h1 - 2.0 * PI * j as f64 * h0;
        h0 = h1;
        h1 = next;
    }
    h1
}

/// Default table size max(200, ⌈10πγ²⌉).
pub fn default_degree(gamma: f64) -> usize {
    ((10.0 * PI * gamma * gamma).ceil() as usize).max(200)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Largest entry of |G - I| for the Gram matrix of h_0..h_K under N(0, 1/2π).
pub fn gram_error(max_degree: usize) -> f64 {
    let rule = PanelRule::new(32);
    let n = max_degree + 1;
    let mut gram = vec![0.0f64; n * n];
    for (x, w) in rule.composite_nodes(-7.0, 7.0, 56) {
        let h = hermite_all(max_degree, x);
        let wx = w * (-PI * x * x).exp();
        for j in 0..n {
            for k in 0..n {
                gram[j * n + k] += wx * h[j] * h[k];
            }
        }
    }
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let want = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((gram[j * n + k] - want).abs());
        }
    }
    worst
}

/// α_k = E_{A_γ}[h_k] via the dual lattice γZ, summed in log space:
/// α_{2m} = (-1)^m (γ/ρ((1/γ)Z)) Σ_{y∈γZ} c_{2m}(2πy)^{2m} ρ(y).
fn alpha_with(k: usize, gamma: f64, log_norm: f64, log_fact: &[f64]) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    let m = k / 2;
    let kf = k as f64;
    let log_c = -0.5 * (kf * (2.0 * PI).ln() + log_fact[k]);
    let peak = ((m as f64) / PI).sqrt() / gamma;
    let j_max = (peak + 12.0 / gamma).ceil() as usize + 2;
    let terms: Vec<f64> = (1..=j_max)
        .map(|j| {
            let y = gamma * j as f64;
            2f64.ln() + log_c + kf * (2.0 * PI * y).ln() - PI * y * y
        })
        .collect();
    let mag = (gamma.ln() - log_norm + log_sum_exp(&terms)).exp();
    if m % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// α_k for one k.
pub fn alpha(k: usize, gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
    }
    let log_norm = gaussian_mass(1.0 / gamma, 1.0, &ThetaSumPolicy::default())?.ln();
    Ok(alpha_with(k, gamma, log_norm, &log_factorials(k)))
}

/// α_0, ..., α_K for one γ.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaTable {
    pub gamma: f64,
    pub alphas: Vec<f64>,
}

impl AlphaTable {
    pub fn new(gamma: f64, max_degree: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
        }
        let log_norm = gaussian_mass(1.0 / gamma, 1.0, &ThetaSumPolicy::default())?.ln();
        let lf = log_factorials(max_degree);
        let alphas = (0..=max_degree)
            .into_par_iter()
            .map(|k| alpha_with(k, gamma, log_norm, &lf))
            .collect();
        Ok(Self { gamma, alphas })
    }

    /// Table with the default size.
    pub fn with_default_degree(gamma: f64) -> Result<Self> {
        Self::new(gamma, default_degree(gamma))
    }

    /// Table large enough for [`series_objective`] at (ξ, β): the geometric
    /// factor ((1+β²)(1+ξ²))^{-k} must carry the tail below 1e-16.
    pub fn for_series(gamma: f64, xi: f64, beta: f64) -> Result<Self> {
        let r = series_ratio(xi, beta);
        let mut degree = default_degree(gamma);
        if r > 0.0 && r < 1.0 {
            let half = (-37.0 / r.ln()).ceil() as usize + 16;
            degree = degree.max(2 * half);
        }
        Self::new(gamma, degree)
    }

    pub fn max_degree(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.alphas.get(k).copied()
    }
}

fn series_ratio(xi: f64, beta: f64) -> f64 {
    if xi.is_infinite() {
        return 0.0;
    }
    1.0 / ((1.0 + beta * beta) * (1.0 + xi * xi))
}

/// Σ_k α_{2k}² / ((1+β²)(1+ξ²))^k over the table, which must have at least the
/// default size and a tail (last ten terms) below 1e-12 of the total.
pub fn series_objective(xi: f64, beta: f64, gamma: f64, table: &AlphaTable) -> Result<f64> {
    Ok(table.alphas[0].powi(2) + series_excess(xi, beta, gamma, table)?)
}

/// The series without its k = 0 term, for comparisons finer than 1 + ulp.
pub fn series_excess(xi: f64, beta: f64, gamma: f64, table: &AlphaTable) -> Result<f64> {
    if !(xi >= 0.0 && beta > 0.0) {
        return Err(Error::domain(format!("need xi >= 0 and beta > 0, got ({xi}, {beta})")));
    }
    if (table.gamma - gamma).abs() > 1e-12 * gamma {
        return Err(Error::domain("alpha table was built for a different gamma"));
    }
    if table.max_degree() < default_degree(gamma) {
        return Err(Error::domain(format!(
            "alpha table has degree {}, need at least {}",
            table.max_degree(),
            default_degree(gamma)
        )));
    }
    let r = series_ratio(xi, beta);
    let terms: Vec<f64> = table
        .alphas
        .iter()
        .step_by(2)
        .enumerate()
        .skip(1)
        .map(|(k, a)| a * a * r.powi(k as i32))
        .collect();
    let excess: f64 = terms.iter().sum();
    let total = table.alphas[0].powi(2) + excess;
    let tail: f64 = terms.iter().rev().take(10).sum();
    log::debug!("series objective: total {total}, tail {tail:.3e} over {} terms", terms.len() + 1);
    if tail > 1e-12 * total {
        return Err(Error::domain(format!(
            "series tail {:.3e} exceeds 1e-12 of the total; enlarge the alpha table",
            tail / total
        )));
    }
    Ok(excess)
}

/// ⟨T^a, T^b⟩_Q = E_Q[T_γ^a·T_γ^b] by quadrature aligned to the sharper ratio.
pub fn inner_product_quadrature(gamma: f64, a: f64, b: f64) -> Result<f64> {
    let pa = SmoothedDGParams::new(gamma, a)?;
    let pb = SmoothedDGParams::new(gamma, b)?;
    let (la, lb) = (LikelihoodRatio::new(pa)?, LikelihoodRatio::new(pb)?);
    let sharp = if pa.s() < pb.s() { pa } else { pb };
    let period = 1.0 / (gamma * sharp.stretch());
    let per_period = ((8.0 * period / sharp.s()).ceil() as usize).max(64);
    let breaks = periodic_breaks(-6.5, 6.5, period, 0.0, per_period, None);
    Ok(PanelRule::new(16).over(&breaks, |z| (la.log_ratio(z) + lb.log_ratio(z) - PI * z * z).exp()))
}

/// (lhs, rhs, |lhs - rhs|) for the smoothing identity
/// E_{z∼Q}[T_γ^β((x+σz)/√(1+σ²))] = T_γ^s(x), s = √((1+β²)(1+σ²) - 1).
pub fn smoothing_identity_check(x: f64, beta: f64, sigma: f64, gamma: f64) -> Result<(f64, f64, f64)> {
    if !(beta > 0.0 && sigma > 0.0) {
        return Err(Error::domain("beta and sigma must be positive"));
    }
    let inner = LikelihoodRatio::new(SmoothedDGParams::new(gamma, beta)?)?;
    let pb = inner.params();
    let b = sigma.hypot(1.0);
    let s = ((1.0 + beta * beta) * (1.0 + sigma * sigma) - 1.0).sqrt();
    let rhs = LikelihoodRatio::new(SmoothedDGParams::new(gamma, s)?)?.ratio(x);
    // In z the inner ratio has period b/(σγ√(1+β²)) and peaks of width ~ b·s_β/σ.
    let period = b / (sigma * gamma * pb.stretch());
    let width = b * pb.s() / sigma;
    let per_period = ((8.0 * period / width).max(4.0 * period).ceil() as usize).max(64);
    let offset = -x / sigma;
    let breaks = periodic_breaks(-6.5, 6.5, period, offset, per_period, None);
    let lhs = PanelRule::new(16).over(&breaks, |z| (inner.log_ratio((x + sigma * z) / b) - PI * z * z).exp());
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

/// Largest deviation on a grid of |x| ≤ 2 between the degree-K Hermite partial
/// sum Σ α_{2k}(1+σ²)^{-k} h_{2k}(x) and the direct T_γ^σ(x).
pub fn expansion_check(gamma: f64, sigma: f64, max_degree: usize) -> Result<f64> {
    let p = SmoothedDGParams::new(gamma, sigma)?;
    let lr = LikelihoodRatio::new(p)?;
    let table = AlphaTable::new(gamma, max_degree)?;
    let damp = 1.0 / (1.0 + sigma * sigma);
    let grid: Vec<f64> = (0..=200).map(|i| -2.0 + 0.02 * i as f64).collect();
    let dev = grid
        .par_iter()
        .map(|&x| {
            let h = hermite_all(max_degree, x);
            let mut acc = 0.0;
            let mut w = 1.0;
            for k in (0..=max_degree).step_by(2) {
                acc += table.alphas[k] * w * h[k];
                w *= damp;
            }
            (acc - lr.ratio(x)).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(dev)
}

/// Lower bound 1/(e√(2πγ)) on |α_{2⌊πγ²⌋}|.
pub fn rounded_degree_bound(gamma: f64) -> (usize, f64) {
    let k = 2 * (PI * gamma * gamma).floor() as usize;
    (k, 1.0 / (std::f64::consts::E * (2.0 * PI * gamma).sqrt()))
}

/// Lower bound 1/√(2πℓγ) on |α_{2πℓ²γ²}| when πγ² is an integer.
pub fn integral_degree_bound(gamma: f64, ell: usize) -> Option<(usize, f64)> {
    let m = PI * gamma * gamma;
    if (m - m.round()).abs() > 1e-9 {
        return None;
    }
    let l = ell as f64;
    Some((2 * (l * l * m.round()) as usize, 1.0 / (2.0 * PI * l * gamma).sqrt()))
}
