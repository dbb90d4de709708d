//! Composite Gauss-Legendre quadrature over explicit panel breakpoints.

use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;

/// A fixed Gauss-Legendre rule applied panel by panel.
#[derive(Debug, Clone)]
pub struct PanelRule {
    nodes: Vec<(f64, f64)>,
}

impl PanelRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("order is positive");
        let rule = GaussLegendre::new(order);
        Self {
            nodes: rule.as_node_weight_pairs().to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over `[a, b]` with a single panel.
    #[inline]
    pub fn panel<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for &(x, w) in &self.nodes {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Sum of single-panel integrals over consecutive breakpoints.
    pub fn over<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.panel(w[0], w[1], &mut f))
            .sum()
    }

    /// Nodes and weights of the composite rule on `panels` equal panels.
    pub fn composite_nodes(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for i in 0..panels {
            let mid = a + (i as f64 + 0.5) * width;
            for &(x, w) in &self.nodes {
                out.push((mid + 0.5 * width * x, 0.5 * width * w));
            }
        }
        out
    }

    /// `[a, b]` split into `panels` equal panels.
    pub fn uniform<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + i as f64 * width;
                let hi = if i + 1 == panels { b } else { lo + width };
                self.panel(lo, hi, &mut f)
            })
            .sum()
    }
}

/// Breakpoints on `[lo, hi]` on the grid offset + j·period/per_period
/// (`per_period` even, so midpoints offset + (j+½)·period are included). When
/// `refine` is below the grid width, extra points mid ± refine·2^i grade the
/// panels down towards every midpoint.
pub fn periodic_breaks(lo: f64, hi: f64, period: f64, offset: f64, per_period: usize, refine: Option<f64>) -> Vec<f64> {
    let per_period = per_period.max(2).next_multiple_of(2);
    let width = period / per_period as f64;
    let first = ((lo - offset) / width).ceil() as i64;
    let last = ((hi - offset) / width).floor() as i64;
    let mut out = vec![lo];
    for j in first..=last {
        out.push(offset + j as f64 * width);
    }
    out.push(hi);
    if let Some(fine) = refine.filter(|&f| f > 0.0 && f < width) {
        let m_first = ((lo - offset) / period - 0.5).ceil() as i64;
        let m_last = ((hi - offset) / period - 0.5).floor() as i64;
        for j in m_first..=m_last {
            let mid = offset + (j as f64 + 0.5) * period;
            let mut step = fine;
            while step < width {
                for x in [mid - step, mid + step] {
                    if x > lo && x < hi {
                        out.push(x);
                    }
                }
                step *= 2.0;
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
    out
}

/// Expectation of `f` under N(0, 1/(2π)), integrating over `|z| ≤ radius`
/// with panels of width at most `max_width`. The neglected mass is below
/// erfc(radius·√π).
pub fn q_expectation<F: FnMut(f64) -> f64>(rule: &PanelRule, radius: f64, max_width: f64, mut f: F) -> f64 {
    let panels = ((2.0 * radius) / max_width).ceil() as usize;
    rule.uniform(-radius, radius, panels, |z| (-std::f64::consts::PI * z * z).exp() * f(z))
}
