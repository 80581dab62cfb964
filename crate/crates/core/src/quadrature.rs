//! Gauss–Legendre rules, composite panels and an adaptive integrator.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over `[lo, hi]` with a single application of the rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Maps the rule onto `[lo, hi]`, returning `(abscissae, weights)`.
    pub fn panel(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 32-point rule used for basis projections.
pub fn gl32() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

/// Shared 16-point rule used by the adaptive integrator.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Composite rule: `panels` equal panels over `[lo, hi]`.
pub fn composite<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: F,
    lo: f64,
    hi: f64,
    panels: usize,
) -> f64 {
    let panels = panels.max(1);
    let w = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let a = lo + p as f64 * w;
            rule.integrate(&f, a, a + w)
        })
        .sum()
}

const MAX_INTERVALS: usize = 200_000;

/// Adaptive Gauss–Legendre integration to absolute tolerance `tol`.
///
/// Each interval is accepted once the 16-point estimate on the whole interval
/// and the sum over its two halves agree within the interval's share of `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if hi == lo {
        return Ok(0.0);
    }
    if !(hi > lo) || !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "adaptive quadrature needs lo < hi and tol > 0 (got [{lo}, {hi}], tol {tol})"
        )));
    }
    let rule = gl16();
    let width = hi - lo;
    let mut stack = vec![(lo, hi, rule.integrate(&f, lo, hi))];
    let mut total = 0.0;
    let mut processed = 0usize;
    while let Some((a, b, whole)) = stack.pop() {
        processed += 1;
        if processed > MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence { lo, hi, tol });
        }
        let mid = 0.5 * (a + b);
        let left = rule.integrate(&f, a, mid);
        let right = rule.integrate(&f, mid, b);
        let refined = left + right;
        let local_tol = tol * (b - a) / width;
        if (refined - whole).abs() <= local_tol || (b - a) < width * 1e-13 {
            if !refined.is_finite() {
                return Err(Error::QuadratureNonConvergence { lo, hi, tol });
            }
            total += refined;
        } else {
            stack.push((mid, b, right));
            stack.push((a, mid, left));
        }
    }
    Ok(total)
}
