//! Independent numerical evaluation of `R_α` and `V_α`, for validating the
//! closed forms: series for Poisson, two-point sums for Bernoulli and
//! adaptive Gauss–Legendre quadrature for Gaussian, Exponential and Gamma.
//!
//! The three integrals `N = ∫ p1^α p2^α p0^{1−2α}` and
//! `D_j = ∫ p_j^α p0^{1−α}` are accumulated as logarithms, so the result is
//! `expm1(ln N − ln D1 − ln D2)` and products over coordinates simply add
//! logs.

use statrs::function::gamma::ln_gamma;

use crate::closed_forms::ParamFamily;
use crate::codiv::PhiFunction;
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::measures::{same_support, DiscreteMeasure};
use crate::quadrature::{integrate, AdaptiveSettings, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Relative accuracy of each integral.
    pub rel_tol: f64,
    /// Fixed number of Poisson terms; `None` truncates adaptively.
    pub poisson_truncation: Option<usize>,
    /// Initial number of quadrature panels per interval.
    pub quad_panels: usize,
    pub quad_order: usize,
    /// Gaussian window half-width in units of σ around the pooled centres.
    pub domain_padding: f64,
    /// Relative size below which a tail contribution is dropped.
    pub tail_cutoff: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            poisson_truncation: None,
            quad_panels: 8,
            quad_order: 32,
            domain_padding: 12.0,
            tail_cutoff: 1e-18,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.quad_order < 2 || self.quad_panels == 0 || !(self.domain_padding > 0.0) {
            return Err(Error::InvalidParameter("invalid oracle configuration".into()));
        }
        Ok(())
    }

    fn settings(&self) -> AdaptiveSettings {
        AdaptiveSettings { rel_tol: self.rel_tol, initial_panels: self.quad_panels, max_panels: 1 << 16 }
    }
}

/// Logarithms of the three integrals; `None` when one diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogIntegrals {
    pub ln_cross: f64,
    pub ln_first: f64,
    pub ln_second: f64,
}

impl LogIntegrals {
    fn add(self, o: LogIntegrals) -> LogIntegrals {
        LogIntegrals {
            ln_cross: self.ln_cross + o.ln_cross,
            ln_first: self.ln_first + o.ln_first,
            ln_second: self.ln_second + o.ln_second,
        }
    }

    pub fn r(&self) -> ExtReal {
        ExtReal::from_f64((self.ln_cross - self.ln_first - self.ln_second).exp_m1())
    }

    pub fn v(&self) -> ExtReal {
        let e = self.ln_first + self.ln_second;
        ExtReal::from_f64(e.exp() * (self.ln_cross - e).exp_m1())
    }
}

/// Exponents of the three integrands given the three log densities.
fn tilted(l0: f64, l1: f64, l2: f64, alpha: f64) -> [f64; 3] {
    let c = (1.0 - 2.0 * alpha) * l0 + alpha * (l1 + l2);
    // 0·(−∞) must not poison the exponent when α = 1/2.
    let c = if alpha == 0.5 { 0.5 * (l1 + l2) } else { c };
    [c, (1.0 - alpha) * l0 + alpha * l1, (1.0 - alpha) * l0 + alpha * l2]
}

/// `ln ∫ exp(h)` over `[a, b]` with the exponent shifted by `shift`.
fn ln_quad(rule: &GaussLegendre, cfg: &OracleConfig, h: &dyn Fn(f64) -> f64, shift: f64, a: f64, b: f64) -> Result<f64> {
    let f = |x: f64| (h(x) - shift).exp();
    Ok(integrate(rule, &f, a, b, cfg.settings())?.ln() + shift)
}

fn gaussian_1d(m: [f64; 3], sigma: f64, alpha: f64, cfg: &OracleConfig, rule: &GaussLegendre) -> Result<LogIntegrals> {
    let ln_norm = -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln();
    let ln_p = move |j: usize, x: f64| ln_norm - 0.5 * ((x - m[j]) / sigma).powi(2);
    let mut centres = m.to_vec();
    centres.push(m[0] + alpha * (m[1] + m[2] - 2.0 * m[0]));
    centres.push(m[0] + alpha * (m[1] - m[0]));
    centres.push(m[0] + alpha * (m[2] - m[0]));
    let lo = centres.iter().copied().fold(f64::INFINITY, f64::min) - cfg.domain_padding * sigma;
    let hi = centres.iter().copied().fold(f64::NEG_INFINITY, f64::max) + cfg.domain_padding * sigma;
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let h = |x: f64| tilted(ln_p(0, x), ln_p(1, x), ln_p(2, x), alpha)[k];
        let shift = centres.iter().map(|&c| h(c)).fold(f64::NEG_INFINITY, f64::max);
        *slot = ln_quad(rule, cfg, &h, shift, lo, hi)?;
    }
    Ok(LogIntegrals { ln_cross: out[0], ln_first: out[1], ln_second: out[2] })
}

/// `ln ∫_0^∞ f(x) dx` given `h(u) = ln f(e^u) + u`, the log integrand
/// after substituting `x = e^u`. Panels march outward from the maximiser,
/// doubling in width once past it; `None` when the contribution per unit
/// width stops decaying (the integral diverges).
fn ln_half_line(h: &dyn Fn(f64) -> f64, cfg: &OracleConfig, rule: &GaussLegendre) -> Result<Option<f64>> {
    // Coarse maximiser on x ∈ [e^-40, e^40].
    let (mut best_u, mut best) = (0.0, f64::NEG_INFINITY);
    for i in -160..=160 {
        let u = 0.25 * i as f64;
        let v = h(u);
        if v.is_nan() {
            return Err(Error::OracleFailure(format!("integrand is NaN at x = {}", u.exp())));
        }
        if v > best {
            best = v;
            best_u = u;
        }
    }
    if best == f64::INFINITY {
        return Ok(None);
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::OracleFailure("integrand vanishes on the search window".into()));
    }
    // Initial panel width from the curvature at the maximiser.
    let d = 1e-3;
    let curv = -(h(best_u + d) - 2.0 * best + h(best_u - d)) / (d * d);
    let width0 = if curv > 0.0 { (1.0 / curv.sqrt()).clamp(1e-3, 1.0) } else { 1.0 };
    let shift = best;
    let f = |u: f64| (h(u) - shift).exp();
    let mut total = 0.0;
    const STALL: usize = 8;
    const GROW_AFTER: usize = 4;
    const MAX_STEPS: usize = 4000;
    for dir in [1.0, -1.0] {
        let mut start = best_u;
        let mut width = width0;
        let mut prev_density = f64::INFINITY;
        let mut stalled = 0;
        let mut converged = false;
        for step in 0..MAX_STEPS {
            let end = start + dir * width;
            // Growth far above the located maximum: the integral diverges.
            if h(end) - shift > 50.0 {
                return Ok(None);
            }
            let (a, b) = if dir > 0.0 { (start, end) } else { (end, start) };
            let c = integrate(rule, &f, a, b, cfg.settings())?;
            total += c;
            let density = c / width;
            if density >= prev_density {
                stalled += 1;
                if stalled >= STALL {
                    return Ok(None);
                }
            } else {
                stalled = 0;
            }
            if step > 0 && c < cfg.tail_cutoff * total {
                converged = true;
                break;
            }
            prev_density = density;
            start = end;
            if step >= GROW_AFTER {
                width *= 2.0;
            }
            if !start.is_finite() || start.abs() > 1e6 {
                break;
            }
        }
        if !converged {
            return Err(Error::OracleFailure("half-line tail did not decay".into()));
        }
    }
    Ok(Some(total.ln() + shift))
}

fn gamma_1d(a: [f64; 3], b: [f64; 3], alpha: f64, cfg: &OracleConfig, rule: &GaussLegendre) -> Result<Option<LogIntegrals>> {
    // ln p(e^u) = a ln β − lnΓ(a) + (a − 1) u − β e^u.
    let ln_p = move |j: usize, u: f64| a[j] * b[j].ln() - ln_gamma(a[j]) + (a[j] - 1.0) * u - b[j] * u.exp();
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let h = |u: f64| tilted(ln_p(0, u), ln_p(1, u), ln_p(2, u), alpha)[k] + u;
        match ln_half_line(&h, cfg, rule)? {
            Some(v) => *slot = v,
            None => return Ok(None),
        }
    }
    Ok(Some(LogIntegrals { ln_cross: out[0], ln_first: out[1], ln_second: out[2] }))
}

/// Running log-sum-exp.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

fn poisson_1d(l: [f64; 3], alpha: f64, cfg: &OracleConfig) -> Result<LogIntegrals> {
    const MAX_TERMS: usize = 10_000_000;
    let ln_l = l.map(f64::ln);
    let mut out = [0.0; 3];
    for (k_int, slot) in out.iter_mut().enumerate() {
        let mut sum = LogSum::new();
        let mut prev = f64::NEG_INFINITY;
        let mut k = 0usize;
        loop {
            let kf = k as f64;
            let lf = ln_gamma(kf + 1.0);
            let lp = |j: usize| kf * ln_l[j] - l[j] - lf;
            let term = tilted(lp(0), lp(1), lp(2), alpha)[k_int];
            sum.add(term);
            if let Some(n) = cfg.poisson_truncation {
                if k + 1 >= n {
                    break;
                }
            } else if term < prev + (0.5f64).ln() && term - sum.value() < cfg.tail_cutoff.ln() {
                // Past the mode with ratio below 1/2: the geometric tail bound
                // keeps the omitted mass under twice this term.
                break;
            }
            prev = term;
            k += 1;
            if k >= MAX_TERMS {
                return Err(Error::OracleFailure("Poisson series did not converge".into()));
            }
        }
        *slot = sum.value();
    }
    Ok(LogIntegrals { ln_cross: out[0], ln_first: out[1], ln_second: out[2] })
}

fn bernoulli_1d(t: [f64; 3], alpha: f64) -> LogIntegrals {
    let mut sums = [LogSum::new(), LogSum::new(), LogSum::new()];
    for x in [0, 1] {
        let lp = |j: usize| if x == 1 { t[j].ln() } else { (1.0 - t[j]).ln() };
        let e = tilted(lp(0), lp(1), lp(2), alpha);
        for (s, v) in sums.iter_mut().zip(e) {
            s.add(v);
        }
    }
    LogIntegrals { ln_cross: sums[0].value(), ln_first: sums[1].value(), ln_second: sums[2].value() }
}

/// Log integrals for a (product) family triple; `None` when divergent.
pub fn oracle_log_integrals(
    f0: &ParamFamily,
    f1: &ParamFamily,
    f2: &ParamFamily,
    alpha: f64,
    cfg: &OracleConfig,
) -> Result<Option<LogIntegrals>> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    crate::closed_forms::check_triple(f0, f1, f2)?;
    if let ParamFamily::GaussianIso { sigma, .. } = f0 {
        for f in [f1, f2] {
            if let ParamFamily::GaussianIso { sigma: s, .. } = f {
                if s != sigma {
                    return Err(Error::InvalidParameter("isotropic Gaussians must share sigma".into()));
                }
            }
        }
    }
    let rule = GaussLegendre::new(cfg.quad_order)?;
    let mut acc = LogIntegrals { ln_cross: 0.0, ln_first: 0.0, ln_second: 0.0 };
    for l in 0..f0.dimension() {
        let c = [f0.component(l)?, f1.component(l)?, f2.component(l)?];
        let part = match &c {
            [ParamFamily::GaussianIso { mean: m0, sigma }, ParamFamily::GaussianIso { mean: m1, .. }, ParamFamily::GaussianIso { mean: m2, .. }] => {
                Some(gaussian_1d([m0[0], m1[0], m2[0]], *sigma, alpha, cfg, &rule)?)
            }
            [ParamFamily::PoissonProd { lambda: a }, ParamFamily::PoissonProd { lambda: b }, ParamFamily::PoissonProd { lambda: d }] => {
                Some(poisson_1d([a[0], b[0], d[0]], alpha, cfg)?)
            }
            [ParamFamily::BernoulliProd { theta: a }, ParamFamily::BernoulliProd { theta: b }, ParamFamily::BernoulliProd { theta: d }] => {
                Some(bernoulli_1d([a[0], b[0], d[0]], alpha))
            }
            [ParamFamily::ExponentialProd { rate: a }, ParamFamily::ExponentialProd { rate: b }, ParamFamily::ExponentialProd { rate: d }] => {
                gamma_1d([1.0; 3], [a[0], b[0], d[0]], alpha, cfg, &rule)?
            }
            [ParamFamily::GammaProd { shape: s0, rate: r0 }, ParamFamily::GammaProd { shape: s1, rate: r1 }, ParamFamily::GammaProd { shape: s2, rate: r2 }] => {
                gamma_1d([s0[0], s1[0], s2[0]], [r0[0], r1[0], r2[0]], alpha, cfg, &rule)?
            }
            _ => unreachable!("component() rejects generic families"),
        };
        match part {
            Some(p) => acc = acc.add(p),
            None => return Ok(None),
        }
    }
    Ok(Some(acc))
}

/// Numerical `R_α(P_{f0} | P_{f1}, P_{f2})`.
pub fn oracle_r_alpha(f0: &ParamFamily, f1: &ParamFamily, f2: &ParamFamily, alpha: f64, cfg: &OracleConfig) -> Result<ExtReal> {
    Ok(oracle_log_integrals(f0, f1, f2, alpha, cfg)?.map_or(ExtReal::PosInf, |i| i.r()))
}

/// Numerical `V_α(P_{f0} | P_{f1}, P_{f2})`.
pub fn oracle_v_alpha(f0: &ParamFamily, f1: &ParamFamily, f2: &ParamFamily, alpha: f64, cfg: &OracleConfig) -> Result<ExtReal> {
    Ok(oracle_log_integrals(f0, f1, f2, alpha, cfg)?.map_or(ExtReal::PosInf, |i| i.v()))
}

/// Reference `R_φ` on a finite support with plain (uncompensated) sums.
pub fn oracle_discrete_bruteforce(
    p0: &DiscreteMeasure,
    p1: &DiscreteMeasure,
    p2: &DiscreteMeasure,
    phi: &PhiFunction,
) -> Result<ExtReal> {
    same_support(p0.support_size(), p1.support_size())?;
    same_support(p0.support_size(), p2.support_size())?;
    for p in [p0, p1, p2] {
        p.require_probability()?;
    }
    let (a, b, c) = (p0.mass(), p1.mass(), p2.mass());
    for x in 0..a.len() {
        if a[x] == 0.0 && (b[x] != 0.0 || c[x] != 0.0) {
            return Ok(ExtReal::PosInf);
        }
    }
    let (mut cross, mut first, mut second) = (0.0, 0.0, 0.0);
    for x in 0..a.len() {
        if a[x] > 0.0 {
            let u = phi.evaluate(b[x] / a[x]);
            let v = phi.evaluate(c[x] / a[x]);
            cross += a[x] * u * v;
            first += a[x] * u;
            second += a[x] * v;
        }
    }
    if first == 0.0 || second == 0.0 {
        return Err(Error::DegeneratePhi);
    }
    Ok(ExtReal::from_f64(cross / (first * second) - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::r_alpha_closed;

    fn fin(x: ExtReal) -> f64 {
        x.finite().expect("finite")
    }

    fn cfg() -> OracleConfig {
        OracleConfig::default()
    }

    #[test]
    fn identical_families_give_zero() {
        let fams = [
            ParamFamily::GaussianIso { mean: vec![0.3], sigma: 2.0 },
            ParamFamily::PoissonProd { lambda: vec![4.0] },
            ParamFamily::BernoulliProd { theta: vec![0.3] },
            ParamFamily::ExponentialProd { rate: vec![0.5] },
            ParamFamily::GammaProd { shape: vec![3.0], rate: vec![2.0] },
        ];
        for f in &fams {
            for alpha in [0.25, 0.5, 1.0] {
                assert!(fin(oracle_r_alpha(f, f, f, alpha, &cfg()).unwrap()).abs() < 1e-9, "{}", f.kind_name());
            }
        }
    }

    #[test]
    fn exponential_example() {
        let e = |b: f64| ParamFamily::ExponentialProd { rate: vec![b] };
        let r = fin(oracle_r_alpha(&e(1.0), &e(2.0), &e(2.0), 1.0, &cfg()).unwrap());
        assert!((r - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn poisson_example() {
        let p = |l: f64| ParamFamily::PoissonProd { lambda: vec![l] };
        let r = fin(oracle_r_alpha(&p(1.0), &p(2.0), &p(3.0), 1.0, &cfg()).unwrap());
        assert!((r - 2f64.exp_m1()).abs() < 1e-9 * 2f64.exp());
    }

    #[test]
    fn poisson_truncation_bound() {
        // A fixed truncation long past the adaptive stopping point agrees.
        let p = |l: f64| ParamFamily::PoissonProd { lambda: vec![l] };
        let adaptive = fin(oracle_r_alpha(&p(7.0), &p(9.0), &p(4.0), 0.5, &cfg()).unwrap());
        let fixed = OracleConfig { poisson_truncation: Some(400), ..cfg() };
        let long = fin(oracle_r_alpha(&p(7.0), &p(9.0), &p(4.0), 0.5, &fixed).unwrap());
        assert!((adaptive - long).abs() < 1e-15 * (1.0 + long));
    }

    #[test]
    fn divergence_detected() {
        let e = |b: f64| ParamFamily::ExponentialProd { rate: vec![b] };
        assert_eq!(oracle_r_alpha(&e(1.0), &e(0.1), &e(0.1), 1.0, &cfg()).unwrap(), ExtReal::PosInf);
        let g = |a: f64, b: f64| ParamFamily::GammaProd { shape: vec![a], rate: vec![b] };
        assert_eq!(oracle_r_alpha(&g(1.0, 1.0), &g(0.5, 1.0), &g(1.0, 1.0), 3.0, &cfg()).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn v_alpha_matches_r_alpha_with_unit_denominators() {
        let p = |l: f64| ParamFamily::PoissonProd { lambda: vec![l] };
        let v = fin(oracle_v_alpha(&p(1.0), &p(2.0), &p(3.0), 1.0, &cfg()).unwrap());
        assert!((v - 2f64.exp_m1()).abs() < 1e-8);
    }

    #[test]
    fn doubling_order_is_stable() {
        let g = |a: f64, b: f64| ParamFamily::GammaProd { shape: vec![a], rate: vec![b] };
        let (f0, f1, f2) = (g(2.0, 1.0), g(2.5, 1.3), g(1.5, 0.8));
        let a = fin(oracle_r_alpha(&f0, &f1, &f2, 0.5, &cfg()).unwrap());
        let b = fin(oracle_r_alpha(&f0, &f1, &f2, 0.5, &OracleConfig { quad_order: 64, ..cfg() }).unwrap());
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        let c = fin(r_alpha_closed(&f0, &f1, &f2, 0.5).unwrap());
        assert!((a - c).abs() <= 1e-8 * (1.0 + c.abs()));
    }

    #[test]
    fn bruteforce_examples() {
        let p0 = DiscreteMeasure::probability(vec![0.5, 0.5]).unwrap();
        let phi = PhiFunction::sqrt();
        assert_eq!(fin(oracle_discrete_bruteforce(&p0, &p0, &p0, &phi).unwrap()), 0.0);
        let q0 = DiscreteMeasure::probability(vec![1.0, 0.0]).unwrap();
        assert_eq!(oracle_discrete_bruteforce(&q0, &p0, &q0, &phi).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn generic_families_are_rejected() {
        let g = ParamFamily::GenericExpFam(ParamFamily::PoissonProd { lambda: vec![1.0] }.to_generic());
        assert!(oracle_r_alpha(&g, &g, &g, 1.0, &cfg()).is_err());
    }
}
