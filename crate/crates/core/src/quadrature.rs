//! Gauss–Legendre quadrature with adaptive panel bisection.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("quadrature order must be at least 2, got {n}")));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫_a^b f` with a single panel.
    pub fn panel<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveSettings {
    pub rel_tol: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-9, initial_panels: 8, max_panels: 1 << 16 }
    }
}

/// `∫_a^b f` for a nonnegative integrand.
///
/// A panel is accepted once its one-panel and two-half-panel estimates
/// differ by less than `rel_tol/4` of the running total, prorated by
/// width. Exceeding `max_panels` is an [`Error::OracleFailure`].
pub fn integrate<F: Fn(f64) -> f64>(rule: &GaussLegendre, f: &F, a: f64, b: f64, s: AdaptiveSettings) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::OracleFailure(format!("bad integration interval [{a}, {b}]")));
    }
    let n0 = s.initial_panels.max(1);
    let h = (b - a) / n0 as f64;
    let mut stack: Vec<(f64, f64, f64)> = (0..n0)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == n0 { b } else { lo + h };
            (lo, hi, rule.panel(f, lo, hi))
        })
        .collect();
    let coarse_total: f64 = stack.iter().map(|p| p.2).sum();
    if !coarse_total.is_finite() {
        return Err(Error::OracleFailure("integrand is not finite".into()));
    }
    let mut scale = coarse_total.abs();
    let mut total = 0.0f64;
    let mut panels = n0;
    while let Some((lo, hi, whole)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.panel(f, lo, mid);
        let right = rule.panel(f, mid, hi);
        let halves = left + right;
        if !halves.is_finite() {
            return Err(Error::OracleFailure("integrand is not finite".into()));
        }
        scale = scale.max(total.abs() + halves.abs());
        let allowed = 0.25 * s.rel_tol * scale * (hi - lo) / (b - a);
        if (halves - whole).abs() <= allowed || hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            total += halves;
        } else {
            panels += 1;
            if panels > s.max_panels {
                return Err(Error::OracleFailure(format!("adaptive quadrature exceeded {} panels", s.max_panels)));
            }
            stack.push((mid, hi, right));
            stack.push((lo, mid, left));
        }
    }
    Ok(total)
}
