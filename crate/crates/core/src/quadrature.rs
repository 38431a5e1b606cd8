//! Gauss-Legendre panels with cumulative integration weights.
//!
//! Survival functions `S(a) = exp(-int_0^a f)` are evaluated panel by panel:
//! the hazard is sampled at the Gauss nodes of each panel, its running
//! integral at every node comes from the integration matrix of the Lagrange
//! interpolant through those nodes, and panel totals use the ordinary weights.

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Gauss-Legendre rule on `[0, 1]` plus the matrix `cum[q][r] = int_0^{t_q} l_r`
/// where `l_r` is the Lagrange basis polynomial of node `r`.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cumulative: Vec<Vec<f64>>,
}

impl PanelRule {
    pub fn new(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order)
            .map_err(|e| Error::Numerical(format!("Gauss-Legendre rule of order {order}: {e}")))?;
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();

        let lagrange = |r: usize, t: f64| -> f64 {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != r)
                .map(|(_, &tk)| (t - tk) / (nodes[r] - tk))
                .product()
        };
        // the rule is exact for the degree order-1 basis polynomials
        let cumulative = nodes
            .iter()
            .map(|&tq| {
                (0..order)
                    .map(|r| {
                        tq * nodes
                            .iter()
                            .zip(&weights)
                            .map(|(&s, &w)| w * lagrange(r, tq * s))
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        Ok(PanelRule {
            nodes,
            weights,
            cumulative,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Running integrals of `values` (samples at the nodes of a panel of
    /// width `h`) up to each node, written into `out`; returns the panel total.
    pub fn accumulate(&self, values: &[f64], h: f64, out: &mut [f64]) -> f64 {
        for (o, row) in out.iter_mut().zip(&self.cumulative) {
            *o = h * row.iter().zip(values).map(|(c, v)| c * v).sum::<f64>();
        }
        h * self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum::<f64>()
    }
}

/// Integrals over the inter-spike interval distribution of a neuron with
/// age-dependent hazard `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMoments {
    /// `int_0^inf S(a) da`, the mean interval.
    pub mean: f64,
    /// `int_0^inf a f(a) S(a) da`, equal to `mean` by integration by parts.
    pub first_moment: f64,
    /// `int_0^inf exp(-lambda a) f(a) S(a) da`.
    pub laplace: f64,
    /// `int_0^inf f(a) S(a) da`, equal to one.
    pub total: f64,
    /// Upper bound on what was left beyond the last panel.
    pub tail_bound: f64,
}

/// Integrates the interval distribution of the hazard `f` by panels of width
/// at most `h`, with panel edges at every entry of `breakpoints`. The march
/// stops once the survival falls below `cutoff`; the remainder is bounded
/// using the floor `sigma` of `f` beyond the last breakpoint.
#[allow(clippy::too_many_arguments)]
pub fn interval_moments(
    rule: &PanelRule,
    f: impl Fn(f64) -> f64,
    lambda: f64,
    sigma: f64,
    breakpoints: &[f64],
    h: f64,
    cutoff: f64,
    max_age: f64,
) -> Result<IntervalMoments> {
    if !(sigma > 0.0) {
        return Err(Error::Unsupported(
            "the hazard needs a positive floor for the interval integrals to converge".into(),
        ));
    }
    let n = rule.order();
    let mut vals = vec![0.0; n];
    let mut cum = vec![0.0; n];
    let mut a0 = 0.0;
    let mut log_s: f64 = 0.0;
    let mut m = IntervalMoments {
        mean: 0.0,
        first_moment: 0.0,
        laplace: 0.0,
        total: 0.0,
        tail_bound: 0.0,
    };
    let mut bp = breakpoints.iter().copied().filter(|&b| b > 0.0).peekable();
    while (-log_s).exp() > cutoff || a0 < breakpoints.iter().copied().fold(0.0, f64::max) {
        if a0 > max_age {
            return Err(Error::Numerical(format!(
                "survival still {:.3e} at age {a0}",
                (-log_s).exp()
            )));
        }
        while bp.peek().is_some_and(|&b| b <= a0 + 1e-14) {
            bp.next();
        }
        let width = match bp.peek() {
            Some(&b) => h.min(b - a0),
            None => h,
        };
        for (v, t) in vals.iter_mut().zip(&rule.nodes) {
            *v = f(a0 + width * t);
        }
        let panel = rule.accumulate(&vals, width, &mut cum);
        for q in 0..n {
            let a = a0 + width * rule.nodes[q];
            let s = (-(log_s + cum[q])).exp();
            let w = width * rule.weights[q];
            m.mean += w * s;
            m.first_moment += w * a * vals[q] * s;
            m.laplace += w * (-lambda * a).exp() * vals[q] * s;
            m.total += w * vals[q] * s;
        }
        log_s += panel;
        a0 += width;
    }
    m.tail_bound = (-log_s).exp() / sigma;
    Ok(m)
}
