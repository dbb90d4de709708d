//! Ornstein-Uhlenbeck forward process and the exponential-integrator DDPM
//! reverse sampler, driven by pluggable score oracles.

use crate::error::{Error, Result};
use crate::pancakes::{random_direction, PancakeParams};
use crate::seeding::{self, domain, StreamRng};
use crate::stats::sample_q;
use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest step count accepted by [`make_schedule`].
pub const MAX_STEPS: usize = 10_000_000;

/// Time grid with N steps of width h = T/N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    total_time: f64,
    steps: usize,
    step: f64,
}

impl DiffusionSchedule {
    pub fn new(total_time: f64, steps: usize) -> Result<Self> {
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::domain(format!("total time must be positive, got {total_time}")));
        }
        if steps == 0 {
            return Err(Error::domain("a schedule needs at least one step"));
        }
        Ok(Self {
            total_time,
            steps,
            step: total_time / steps as f64,
        })
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Time kh of grid index k.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
}

/// Schedule with T = max(ln(K/ε), 1) and h = ε²/(L²d), rounded so that N = ⌈T/h⌉
/// steps cover T exactly.
pub fn make_schedule(eps: f64, lipschitz: f64, kl_bound: f64, d: usize) -> Result<DiffusionSchedule> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(lipschitz.is_finite() && lipschitz >= 1.0) {
        return Err(Error::domain(format!("L must be >= 1, got {lipschitz}")));
    }
    if !(kl_bound.is_finite() && kl_bound >= 2.0) {
        return Err(Error::domain(format!("K must be >= 2, got {kl_bound}")));
    }
    if d == 0 {
        return Err(Error::domain("dimension must be >= 1"));
    }
    let t = (kl_bound / eps).ln().max(1.0);
    let h = eps * eps / (lipschitz * lipschitz * d as f64);
    let n = (t / h).ceil();
    if n > MAX_STEPS as f64 {
        return Err(Error::config(format!("schedule needs {n:.3e} steps, above the {MAX_STEPS} guard")));
    }
    DiffusionSchedule::new(t, n as usize)
}

/// A time-indexed estimate of ∇log D_{kh}.
pub trait ScoreOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn schedule(&self) -> &DiffusionSchedule;
    /// Score estimate at grid index `step` (0..=N).
    fn eval(&self, step: usize, x: ArrayView1<f64>) -> Result<Array1<f64>>;
    fn describe(&self) -> String;
}

impl<T: ScoreOracle + ?Sized> ScoreOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn schedule(&self) -> &DiffusionSchedule {
        (**self).schedule()
    }
    fn eval(&self, step: usize, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        (**self).eval(step, x)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

fn check_step(step: usize, sched: &DiffusionSchedule) -> Result<()> {
    if step > sched.steps() {
        Err(Error::domain(format!("step {step} outside the schedule (N = {})", sched.steps())))
    } else {
        Ok(())
    }
}

/// Exact score of the forward process started from a pancake distribution.
#[derive(Debug, Clone)]
pub struct ExactPancakeOracle {
    sched: DiffusionSchedule,
    params: Vec<PancakeParams>,
}

impl ExactPancakeOracle {
    pub fn new(p: &PancakeParams, sched: DiffusionSchedule) -> Result<Self> {
        p.ratio()?;
        let params = (0..=sched.steps())
            .map(|k| p.forward_params(sched.time(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sched, params })
    }

    pub fn params_at(&self, step: usize) -> &PancakeParams {
        &self.params[step]
    }
}

impl ScoreOracle for ExactPancakeOracle {
    fn dim(&self) -> usize {
        self.params[0].dim()
    }
    fn schedule(&self) -> &DiffusionSchedule {
        &self.sched
    }
    fn eval(&self, step: usize, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_step(step, &self.sched)?;
        self.params[step].score(x)
    }
    fn describe(&self) -> String {
        let p = &self.params[0];
        format!("exact pancake (gamma={}, sigma={})", p.gamma(), p.sigma())
    }
}

/// Score of N(0, I/(2π)) at every step: x ↦ -2πx.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    dim: usize,
    sched: DiffusionSchedule,
}

impl GaussianOracle {
    pub fn new(dim: usize, sched: DiffusionSchedule) -> Self {
        Self { dim, sched }
    }
}

impl ScoreOracle for GaussianOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn schedule(&self) -> &DiffusionSchedule {
        &self.sched
    }
    fn eval(&self, step: usize, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_step(step, &self.sched)?;
        Ok(x.to_owned() * (-2.0 * PI))
    }
    fn describe(&self) -> String {
        "exact gaussian".into()
    }
}

/// Base oracle plus eps·w_k with a seed-determined unit vector w_k per step,
/// so its L² error is exactly eps under any law.
pub struct PerturbedOracle<O> {
    base: O,
    eps: f64,
    shifts: Vec<Array1<f64>>,
}

impl<O: ScoreOracle> PerturbedOracle<O> {
    pub fn new(base: O, eps: f64, seed: u64) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::domain(format!("perturbation size must be >= 0, got {eps}")));
        }
        let d = base.dim();
        let shifts = (0..=base.schedule().steps())
            .map(|k| {
                let mut rng = seeding::stream(seed, &[domain::PERTURB, k as u64]);
                random_direction(d, &mut rng) * eps
            })
            .collect();
        Ok(Self { base, eps, shifts })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl<O: ScoreOracle> ScoreOracle for PerturbedOracle<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn schedule(&self) -> &DiffusionSchedule {
        self.base.schedule()
    }
    fn eval(&self, step: usize, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let v = self.base.eval(step, x)?;
        if self.eps == 0.0 {
            return Ok(v);
        }
        Ok(v + &self.shifts[step])
    }
    fn describe(&self) -> String {
        format!("{} + perturbation {}", self.base.describe(), self.eps)
    }
}

/// Zeroes `v` when its norm exceeds `m`; returns whether it did.
pub fn truncate(v: &mut Array1<f64>, m: f64) -> bool {
    if v.dot(v) > m * m {
        v.fill(0.0);
        true
    } else {
        false
    }
}

/// Base oracle cut to zero wherever its norm exceeds M.
pub struct TruncatedOracle<O> {
    base: O,
    m: f64,
}

impl<O: ScoreOracle> TruncatedOracle<O> {
    pub fn new(base: O, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::domain(format!("truncation level must be positive, got {m}")));
        }
        Ok(Self { base, m })
    }

    /// Evaluation together with a flag telling whether truncation fired.
    pub fn eval_flagged(&self, step: usize, x: ArrayView1<f64>) -> Result<(Array1<f64>, bool)> {
        let mut v = self.base.eval(step, x)?;
        let fired = truncate(&mut v, self.m);
        Ok((v, fired))
    }
}

impl<O: ScoreOracle> ScoreOracle for TruncatedOracle<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn schedule(&self) -> &DiffusionSchedule {
        self.base.schedule()
    }
    fn eval(&self, step: usize, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.eval_flagged(step, x)?.0)
    }
    fn describe(&self) -> String {
        format!("{} truncated at {}", self.base.describe(), self.m)
    }
}

/// Exact OU transition: e^{-t}x0 + √(1-e^{-2t})·z with z ∼ N(0, I/(2π)).
pub fn ou_sample(x0: ArrayView1<f64>, t: f64, rng: &mut StreamRng) -> Result<Array1<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    let a = (-t).exp();
    let b = (-(-2.0 * t).exp_m1()).sqrt();
    Ok(x0.mapv(|v| a * v + b * sample_q(rng)))
}

/// Runs the reverse recursion for the first `steps` iterations (at most N) and
/// records the state after each count listed in `checkpoints`.
pub fn ddpm_reverse_trace<O: ScoreOracle + ?Sized>(
    oracle: &O,
    steps: usize,
    checkpoints: &[usize],
    rng: &mut StreamRng,
) -> Result<Vec<Array1<f64>>> {
    let sched = *oracle.schedule();
    let n = sched.steps();
    if steps > n {
        return Err(Error::domain(format!("{steps} reverse steps requested, schedule has {n}")));
    }
    let h = sched.step();
    let grow = h.exp();
    let drift = h.exp_m1() / PI;
    let noise = (2.0 * h).exp_m1().sqrt();
    let mut y: Array1<f64> = (0..oracle.dim()).map(|_| sample_q(rng)).collect();
    let mut out = Vec::with_capacity(checkpoints.len());
    let record = |k: usize, y: &Array1<f64>, out: &mut Vec<Array1<f64>>| {
        for &c in checkpoints {
            if c == k {
                out.push(y.clone());
            }
        }
    };
    record(0, &y, &mut out);
    for k in 0..steps {
        let index = n - k;
        let s = oracle.eval(index, y.view()).map_err(|e| Error::Oracle {
            step: index,
            source: Box::new(e),
        })?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle {
                step: index,
                source: Box::new(Error::Numeric("non-finite score".into())),
            });
        }
        y.zip_mut_with(&s, |yi, si| *yi = grow * *yi + drift * si + noise * sample_q(rng));
        record(k + 1, &y, &mut out);
    }
    Ok(out)
}

/// One reverse trajectory with `steps` of the N scheduled updates; `steps = 0`
/// returns the initial N(0, I/(2π)) draw.
pub fn ddpm_reverse_partial<O: ScoreOracle + ?Sized>(oracle: &O, steps: usize, rng: &mut StreamRng) -> Result<Array1<f64>> {
    Ok(ddpm_reverse_trace(oracle, steps, &[steps], rng)?.pop().expect("one checkpoint"))
}

/// One full reverse trajectory y_N.
pub fn ddpm_reverse<O: ScoreOracle + ?Sized>(oracle: &O, rng: &mut StreamRng) -> Result<Array1<f64>> {
    ddpm_reverse_partial(oracle, oracle.schedule().steps(), rng)
}

/// `runs` independent trajectories, row r driven by the stream (seed, r).
/// The output does not depend on the size of the worker pool.
pub fn ddpm_sample<O: ScoreOracle + ?Sized>(oracle: &O, runs: usize, seed: u64) -> Result<Array2<f64>> {
    let rows: Vec<Array1<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeding::stream(seed, &[domain::REVERSE, r as u64]);
            ddpm_reverse(oracle, &mut rng)
        })
        .collect::<Result<_>>()?;
    let d = oracle.dim();
    let mut out = Array2::zeros((runs, d));
    for (mut row, y) in out.rows_mut().into_iter().zip(rows) {
        row.assign(&y);
    }
    Ok(out)
}

/// Per-coordinate variance, in units of 1/(2π), after k reverse steps with the
/// exact Gaussian oracle: v ← (2 - e^h)²v + (e^{2h} - 1), v₀ = 1.
pub fn gaussian_variance_recurrence(h: f64, k: usize) -> f64 {
    let a = (2.0 - h.exp()).powi(2);
    let b = (2.0 * h).exp_m1();
    (0..k).fold(1.0, |v, _| a * v + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss1d::{cdf_smoothed, forward_sigma, SmoothedDGParams};
    use crate::pancakes::default_direction;
    use crate::stats::{ks_critical, ks_statistic, q_cdf, variance_about};

    fn sched(t: f64, n: usize) -> DiffusionSchedule {
        DiffusionSchedule::new(t, n).unwrap()
    }

    #[test]
    fn schedule_invariants() {
        let s = sched(2.0, 100);
        assert_eq!(s.step(), 2.0 / 100.0);
        assert!(DiffusionSchedule::new(2.0, 0).is_err());
        assert!(DiffusionSchedule::new(-1.0, 4).is_err());
    }

    #[test]
    fn make_schedule_examples() {
        let s = make_schedule(0.1, 1.0, 2.0, 1).unwrap();
        assert!((s.total_time() - 20f64.ln()).abs() < 1e-15);
        assert_eq!(s.steps(), (20f64.ln() / 0.01).ceil() as usize);
        assert!(s.step() <= 0.01);
        let s2 = make_schedule(0.1, 1.0, 2.0, 2).unwrap();
        assert!((s2.steps() as f64 / s.steps() as f64 - 2.0).abs() < 0.01);
        let s = make_schedule(0.9, 1.0, 2.0, 1).unwrap();
        assert_eq!(s.total_time(), 1.0);
        assert!(make_schedule(0.01, 100.0, 2.0, 64).is_err());
        assert!(make_schedule(1.0, 1.0, 2.0, 1).is_err());
        assert!(make_schedule(0.1, 0.5, 2.0, 1).is_err());
        assert!(make_schedule(0.1, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn ou_sample_identity_and_stationarity() {
        let mut rng = seeding::stream(1, &[0]);
        let x0 = ndarray::array![0.3, -1.2];
        assert_eq!(ou_sample(x0.view(), 0.0, &mut rng).unwrap(), x0);
        let mut coords = vec![Vec::new(), Vec::new()];
        for _ in 0..50_000 {
            let x: Array1<f64> = (0..2).map(|_| sample_q(&mut rng)).collect();
            let y = ou_sample(x.view(), 0.7, &mut rng).unwrap();
            coords[0].push(y[0]);
            coords[1].push(y[1]);
        }
        for c in &coords {
            assert!(variance_about(c, 0.0).within(1.0 / (2.0 * PI), 4.0));
        }
    }

    #[test]
    fn ou_sample_moves_pancakes_along_forward_sigma() {
        let p = PancakeParams::new(4.0, 0.05, default_direction(2)).unwrap();
        let mut rng = seeding::stream(2, &[0]);
        let xs = p.sample(50_000, &mut rng).unwrap();
        let target = SmoothedDGParams::new(4.0, forward_sigma(0.05, 0.3)).unwrap();
        let proj: Vec<f64> = xs
            .rows()
            .into_iter()
            .map(|r| ou_sample(r, 0.3, &mut rng).unwrap().dot(&p.direction()))
            .collect();
        let d = ks_statistic(&proj, |z| cdf_smoothed(z, &target));
        assert!(d < ks_critical(proj.len(), 0.01), "{d}");
    }

    #[test]
    fn zero_steps_returns_the_initial_gaussian_draw() {
        let oracle = GaussianOracle::new(1, sched(1.0, 10));
        let mut rng = seeding::stream(3, &[0]);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| ddpm_reverse_partial(&oracle, 0, &mut rng).unwrap()[0])
            .collect();
        assert!(ks_statistic(&xs, q_cdf) < ks_critical(xs.len(), 0.01));
        assert!(ddpm_reverse_partial(&oracle, 11, &mut rng).is_err());
    }

    #[test]
    fn gaussian_oracle_follows_variance_recurrence() {
        let s = sched(2.0, 50);
        let oracle = GaussianOracle::new(3, s);
        let checkpoints = [1usize, 10, 50];
        let mut per: Vec<Vec<f64>> = vec![Vec::new(); checkpoints.len()];
        for r in 0..4000u64 {
            let mut rng = seeding::stream(4, &[r]);
            let trace = ddpm_reverse_trace(&oracle, 50, &checkpoints, &mut rng).unwrap();
            for (i, y) in trace.iter().enumerate() {
                per[i].extend(y.iter().copied());
            }
        }
        for (i, &k) in checkpoints.iter().enumerate() {
            let want = gaussian_variance_recurrence(s.step(), k) / (2.0 * PI);
            let est = variance_about(&per[i], 0.0);
            assert!(est.within(want, 4.0), "k={k}: {est:?} vs {want}");
        }
    }

    #[test]
    fn recurrence_bias_is_order_h() {
        for n in [100usize, 1000] {
            let h = 2.0 / n as f64;
            let v = gaussian_variance_recurrence(h, n);
            assert!((v - 1.0).abs() <= 5.0 * h, "n={n}: {v}");
        }
    }

    #[test]
    fn oracle_variants() {
        let s = sched(1.0, 20);
        let p = PancakeParams::new(4.0, 0.1, default_direction(3)).unwrap();
        let exact = ExactPancakeOracle::new(&p, s).unwrap();
        let x = ndarray::array![0.2, -0.4, 0.1];
        let direct = p.forward_params(s.time(7)).unwrap().score(x.view()).unwrap();
        assert_eq!(exact.eval(7, x.view()).unwrap(), direct);
        assert!(exact.eval(21, x.view()).is_err());

        let base = ExactPancakeOracle::new(&p, s).unwrap();
        let zero = PerturbedOracle::new(base, 0.0, 9).unwrap();
        assert_eq!(zero.eval(7, x.view()).unwrap(), direct);

        let g = GaussianOracle::new(3, s);
        let pert = PerturbedOracle::new(g, 0.2, 9).unwrap();
        let diff = pert.eval(3, x.view()).unwrap() + &(&x * (2.0 * PI));
        assert!((diff.dot(&diff).sqrt() - 0.2).abs() < 1e-12);

        let trunc = TruncatedOracle::new(GaussianOracle::new(3, s), 1.0).unwrap();
        let (v, fired) = trunc.eval_flagged(0, x.view()).unwrap();
        assert!(fired && v.iter().all(|&c| c == 0.0));
        assert!(TruncatedOracle::new(GaussianOracle::new(3, s), 0.0).is_err());
    }

    #[test]
    fn gaussian_truncation_at_ten_root_d_is_rare() {
        // ‖2πz‖² = 2π·χ²_d for z ∼ Q, so P(fire) = P(χ²_d > 100d/(2π)).
        for d in [3usize, 8, 16, 64] {
            let x = 100.0 * d as f64 / (2.0 * PI);
            let p = statrs::function::gamma::gamma_ur(d as f64 / 2.0, x / 2.0);
            assert!(p < 1e-8, "d={d}: {p}");
        }
        let oracle = TruncatedOracle::new(GaussianOracle::new(3, sched(1.0, 1)), 10.0 * 3f64.sqrt()).unwrap();
        let mut rng = seeding::stream(5, &[0]);
        for _ in 0..100_000 {
            let z: Array1<f64> = (0..3).map(|_| sample_q(&mut rng)).collect();
            assert!(!oracle.eval_flagged(1, z.view()).unwrap().1);
        }
    }

    #[test]
    fn oracle_errors_carry_the_step() {
        struct Broken(DiffusionSchedule);
        impl ScoreOracle for Broken {
            fn dim(&self) -> usize {
                1
            }
            fn schedule(&self) -> &DiffusionSchedule {
                &self.0
            }
            fn eval(&self, step: usize, _: ArrayView1<f64>) -> Result<Array1<f64>> {
                if step == 3 {
                    Err(Error::Numeric("boom".into()))
                } else {
                    Ok(ndarray::array![0.0])
                }
            }
            fn describe(&self) -> String {
                "broken".into()
            }
        }
        let mut rng = seeding::stream(6, &[0]);
        match ddpm_reverse(&Broken(sched(1.0, 5)), &mut rng) {
            Err(Error::Oracle { step, .. }) => assert_eq!(step, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn batches_are_independent_of_pool_size() {
        let p = PancakeParams::new(4.0, 0.1, default_direction(2)).unwrap();
        let oracle = ExactPancakeOracle::new(&p, sched(1.0, 40)).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ddpm_sample(&oracle, 64, 17).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
