//! Covariance-type and correlation-type codivergences on finite measures.
//!
//! With `r_j = dP_j/dP0`,
//!
//! ```text
//! V_φ(P0 | P1, P2) = ∫ φ(r1) φ(r2) dP0 − ∫ φ(r1) dP0 · ∫ φ(r2) dP0
//! R_φ(P0 | P1, P2) = V_φ / (∫ φ(r1) dP0 · ∫ φ(r2) dP0)
//! ```
//!
//! and both are `+∞` unless `P1, P2 ≪ P0`. All integrals are finite sums
//! evaluated with compensated summation.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::measures::{first_undominated, same_support, DiscreteMeasure};
use crate::summation::KahanSum;

type PhiFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A nonnegative generator `φ` normalised to `φ(1) = 1`, carried together
/// with `φ'(1)` and `φ''(1)`.
#[derive(Clone)]
pub struct PhiFunction {
    name: String,
    eval: Arc<PhiFn>,
    dphi_at_one: f64,
    d2phi_at_one: f64,
}

impl fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFunction")
            .field("name", &self.name)
            .field("dphi_at_one", &self.dphi_at_one)
            .field("d2phi_at_one", &self.d2phi_at_one)
            .finish()
    }
}

const PHI_ONE_TOL: f64 = 1e-14;

impl PhiFunction {
    /// Wraps a user-supplied `φ`. Checks `φ(1) = 1` and nonnegativity on a
    /// sample grid of `[0, 100]`.
    pub fn new<F>(name: impl Into<String>, f: F, dphi_at_one: f64, d2phi_at_one: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let one = f(1.0);
        if !((one - 1.0).abs() <= PHI_ONE_TOL) {
            return Err(Error::InvalidPhi(format!("phi(1) = {one}, expected 1")));
        }
        for k in 0..=400 {
            let x = 0.25 * k as f64;
            let y = f(x);
            if !(y >= 0.0) || !y.is_finite() {
                return Err(Error::InvalidPhi(format!("phi({x}) = {y} is not a nonnegative real")));
            }
        }
        if !dphi_at_one.is_finite() || !d2phi_at_one.is_finite() {
            return Err(Error::InvalidPhi("derivatives at 1 must be finite".into()));
        }
        Ok(Self { name: name.into(), eval: Arc::new(f), dphi_at_one, d2phi_at_one })
    }

    /// `φ(x) = x^α`, `α > 0`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        let f: Box<dyn Fn(f64) -> f64 + Send + Sync> = if alpha == 1.0 {
            Box::new(|x| x)
        } else if alpha == 0.5 {
            Box::new(f64::sqrt)
        } else {
            Box::new(move |x: f64| x.powf(alpha))
        };
        Self::new(format!("alpha:{alpha}"), f, alpha, alpha * (alpha - 1.0))
    }

    /// `φ(x) = x`, the χ² generator.
    pub fn identity() -> Self {
        Self::power(1.0).expect("alpha = 1 is valid")
    }

    /// `φ(x) = √x`, the Hellinger generator.
    pub fn sqrt() -> Self {
        Self::power(0.5).expect("alpha = 0.5 is valid")
    }

    /// Parses `"chi2"`, `"hellinger"` or `"alpha:<value>"`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "chi2" | "identity" => Ok(Self::identity()),
            "hellinger" | "sqrt" => Ok(Self::sqrt()),
            other => match other.strip_prefix("alpha:") {
                Some(v) => {
                    let alpha: f64 =
                        v.trim().parse().map_err(|_| Error::InvalidPhi(format!("cannot parse alpha in {other:?}")))?;
                    Self::power(alpha)
                }
                None => Err(Error::InvalidPhi(format!("unknown phi {other:?}"))),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn phi_at_one(&self) -> f64 {
        self.evaluate(1.0)
    }

    pub fn dphi_at_one(&self) -> f64 {
        self.dphi_at_one
    }

    pub fn d2phi_at_one(&self) -> f64 {
        self.d2phi_at_one
    }
}

/// The three integrals shared by `V_φ` and `R_φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiIntegrals {
    /// `∫ φ(r1) φ(r2) dP0`
    pub cross: f64,
    /// `∫ φ(r1) dP0`
    pub first: f64,
    /// `∫ φ(r2) dP0`
    pub second: f64,
}

fn check_triple(p0: &DiscreteMeasure, p1: &DiscreteMeasure, p2: &DiscreteMeasure) -> Result<()> {
    same_support(p0.support_size(), p1.support_size())?;
    same_support(p0.support_size(), p2.support_size())?;
    p0.require_probability()?;
    p1.require_probability()?;
    p2.require_probability()
}

/// `None` when `P1` or `P2` is not dominated by `P0`.
pub fn phi_integrals(
    p0: &DiscreteMeasure,
    p1: &DiscreteMeasure,
    p2: &DiscreteMeasure,
    phi: &PhiFunction,
) -> Result<Option<PhiIntegrals>> {
    check_triple(p0, p1, p2)?;
    if first_undominated(p1.mass(), p0.mass()).is_some() || first_undominated(p2.mass(), p0.mass()).is_some() {
        return Ok(None);
    }
    let (mut cross, mut first, mut second) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for ((&q0, &q1), &q2) in p0.mass().iter().zip(p1.mass()).zip(p2.mass()) {
        if q0 == 0.0 {
            continue;
        }
        let f1 = phi.evaluate(q1 / q0);
        let f2 = phi.evaluate(q2 / q0);
        cross.add(q0 * f1 * f2);
        first.add(q0 * f1);
        second.add(q0 * f2);
    }
    Ok(Some(PhiIntegrals { cross: cross.value(), first: first.value(), second: second.value() }))
}

/// Covariance-type codivergence `V_φ(P0 | P1, P2)`.
pub fn v_phi(p0: &DiscreteMeasure, p1: &DiscreteMeasure, p2: &DiscreteMeasure, phi: &PhiFunction) -> Result<ExtReal> {
    Ok(match phi_integrals(p0, p1, p2, phi)? {
        None => ExtReal::PosInf,
        Some(i) => ExtReal::from_f64(i.cross - i.first * i.second),
    })
}

/// Correlation-type codivergence `R_φ(P0 | P1, P2)`.
///
/// A vanishing denominator integral is reported as [`Error::DegeneratePhi`].
pub fn r_phi(p0: &DiscreteMeasure, p1: &DiscreteMeasure, p2: &DiscreteMeasure, phi: &PhiFunction) -> Result<ExtReal> {
    match phi_integrals(p0, p1, p2, phi)? {
        None => Ok(ExtReal::PosInf),
        Some(i) => {
            let denom = i.first * i.second;
            if denom == 0.0 {
                return Err(Error::DegeneratePhi);
            }
            // Covariance form: `cross/denom − 1` would cancel when the ratio is near 1.
            Ok(ExtReal::from_f64((i.cross - denom) / denom))
        }
    }
}

/// `V_α = V_φ` with `φ(x) = x^α`.
pub fn v_alpha(p0: &DiscreteMeasure, p1: &DiscreteMeasure, p2: &DiscreteMeasure, alpha: f64) -> Result<ExtReal> {
    v_phi(p0, p1, p2, &PhiFunction::power(alpha)?)
}

/// `R_α = R_φ` with `φ(x) = x^α`.
pub fn r_alpha(p0: &DiscreteMeasure, p1: &DiscreteMeasure, p2: &DiscreteMeasure, alpha: f64) -> Result<ExtReal> {
    r_phi(p0, p1, p2, &PhiFunction::power(alpha)?)
}

/// χ²-codivergence `∫ (dP1/dP0) dP2 − 1`.
///
/// Evaluated as `Σ (p1 − p0)(p2 − p0)/p0` plus the (vanishing) mass
/// corrections, which is the same quantity without the cancellation of
/// subtracting 1 from a sum close to 1.
pub fn chi2_codiv(p0: &DiscreteMeasure, p1: &DiscreteMeasure, p2: &DiscreteMeasure) -> Result<ExtReal> {
    check_triple(p0, p1, p2)?;
    if first_undominated(p1.mass(), p0.mass()).is_some() || first_undominated(p2.mass(), p0.mass()).is_some() {
        return Ok(ExtReal::PosInf);
    }
    let mut centred = KahanSum::new();
    for ((&q0, &q1), &q2) in p0.mass().iter().zip(p1.mass()).zip(p2.mass()) {
        if q0 > 0.0 {
            centred.add((q1 - q0) * (q2 - q0) / q0);
        }
    }
    let correction = (p1.total() - 1.0) + (p2.total() - 1.0) - (p0.total() - 1.0);
    Ok(ExtReal::from_f64(centred.value() + correction))
}

/// Hellinger affinity `Σ √(p q)`.
pub fn hellinger_affinity(p: &[f64], q: &[f64]) -> f64 {
    let mut s = KahanSum::new();
    for (&a, &b) in p.iter().zip(q) {
        s.add((a * b).sqrt());
    }
    s.value()
}

/// Hellinger codivergence `α(P1,P2) / (α(P0,P1) α(P0,P2)) − 1`.
///
/// Needs no domination: it is finite as soon as both affinities with `P0`
/// are positive.
pub fn hellinger_codiv(p0: &DiscreteMeasure, p1: &DiscreteMeasure, p2: &DiscreteMeasure) -> Result<ExtReal> {
    check_triple(p0, p1, p2)?;
    let a01 = hellinger_affinity(p0.mass(), p1.mass());
    let a02 = hellinger_affinity(p0.mass(), p2.mass());
    if a01 == 0.0 || a02 == 0.0 {
        return Ok(ExtReal::PosInf);
    }
    let a12 = hellinger_affinity(p1.mass(), p2.mass());
    Ok(ExtReal::from_f64(a12 / (a01 * a02) - 1.0))
}

/// Classical `χ²(P, Q) = Σ (p − q)²/q`; `+∞` without domination.
pub fn chi2_divergence(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<ExtReal> {
    same_support(q.support_size(), p.support_size())?;
    if first_undominated(p.mass(), q.mass()).is_some() {
        return Ok(ExtReal::PosInf);
    }
    let mut s = KahanSum::new();
    for (&a, &b) in p.mass().iter().zip(q.mass()) {
        if b > 0.0 {
            s.add((a - b) * (a - b) / b);
        }
    }
    Ok(ExtReal::Finite(s.value()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob(m: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::probability(m.to_vec()).unwrap()
    }

    fn fin(x: ExtReal) -> f64 {
        x.finite().expect("finite")
    }

    #[test]
    fn phi_validation() {
        assert!(PhiFunction::new("bad", |x| 2.0 * x, 2.0, 0.0).is_err());
        assert!(PhiFunction::new("neg", |x| 2.0 - x, -1.0, 0.0).is_err());
        assert!(PhiFunction::power(0.0).is_err());
        assert!(PhiFunction::power(-1.0).is_err());
        let phi = PhiFunction::power(0.25).unwrap();
        assert_eq!(phi.phi_at_one(), 1.0);
        assert_eq!(phi.dphi_at_one(), 0.25);
        assert_eq!(phi.d2phi_at_one(), 0.25 * -0.75);
    }

    #[test]
    fn phi_parse() {
        assert_eq!(PhiFunction::parse("chi2").unwrap().dphi_at_one(), 1.0);
        assert_eq!(PhiFunction::parse("hellinger").unwrap().dphi_at_one(), 0.5);
        assert_eq!(PhiFunction::parse("alpha:0.25").unwrap().dphi_at_one(), 0.25);
        assert!(PhiFunction::parse("alpha:x").is_err());
        assert!(PhiFunction::parse("kl").is_err());
    }

    #[test]
    fn v_phi_examples() {
        let p0 = prob(&[0.5, 0.5]);
        let p1 = prob(&[0.25, 0.75]);
        let p2 = prob(&[0.75, 0.25]);
        let id = PhiFunction::identity();
        assert_eq!(fin(v_phi(&p0, &p0, &p0, &PhiFunction::sqrt()).unwrap()), 0.0);
        assert!((fin(v_phi(&p0, &p1, &p2, &id).unwrap()) + 0.25).abs() < 1e-15);
        let p0 = prob(&[1.0, 0.0]);
        let p1 = prob(&[0.5, 0.5]);
        assert_eq!(v_phi(&p0, &p1, &p0, &id).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn v_phi_dimension_error() {
        let p0 = prob(&[0.5, 0.5]);
        let p1 = prob(&[0.2, 0.3, 0.5]);
        assert!(matches!(v_phi(&p0, &p1, &p0, &PhiFunction::identity()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn r_phi_examples() {
        let p0 = prob(&[0.5, 0.5]);
        let p1 = prob(&[0.25, 0.75]);
        let p2 = prob(&[0.75, 0.25]);
        assert_eq!(fin(r_phi(&p0, &p0, &p0, &PhiFunction::sqrt()).unwrap()), 0.0);
        let id = PhiFunction::identity();
        assert_eq!(r_phi(&p0, &p1, &p2, &id).unwrap(), v_phi(&p0, &p1, &p2, &id).unwrap());
        let r = fin(r_phi(&p0, &p1, &p1, &PhiFunction::sqrt()).unwrap());
        let rho = fin(hellinger_codiv(&p0, &p1, &p1).unwrap());
        assert!((r - rho).abs() < 1e-15);
    }

    #[test]
    fn r_phi_degenerate_denominator() {
        // φ vanishes away from a neighbourhood of 1, so ∫φ(r)dP0 = 0 for r ∈ {0, 2}.
        let bump = PhiFunction::new("bump", |x: f64| (1.0 - (x - 1.0).abs() * 2.0).max(0.0), 0.0, 0.0).unwrap();
        let p0 = prob(&[0.5, 0.5]);
        let p1 = prob(&[0.0, 1.0]);
        assert_eq!(r_phi(&p0, &p1, &p0, &bump), Err(Error::DegeneratePhi));
        assert_eq!(v_phi(&p0, &p1, &p0, &bump).unwrap(), ExtReal::Finite(0.0));
    }

    #[test]
    fn chi2_examples() {
        let p0 = prob(&[0.5, 0.5]);
        let p1 = prob(&[0.25, 0.75]);
        let p2 = prob(&[0.75, 0.25]);
        assert!((fin(chi2_codiv(&p0, &p1, &p1).unwrap()) - 0.25).abs() < 1e-15);
        assert_eq!(fin(chi2_codiv(&p0, &p0, &p0).unwrap()), 0.0);
        assert!((fin(chi2_codiv(&p0, &p1, &p2).unwrap()) + 0.25).abs() < 1e-15);
        assert_eq!(chi2_codiv(&prob(&[1.0, 0.0]), &p1, &p1).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn hellinger_examples() {
        let p0 = prob(&[0.5, 0.5]);
        assert_eq!(fin(hellinger_codiv(&p0, &p0, &p0).unwrap()), 0.0);
        assert_eq!(hellinger_codiv(&prob(&[1.0, 0.0]), &prob(&[0.0, 1.0]), &p0).unwrap(), ExtReal::PosInf);

        // Numerator 2·√(0.25·0.75), both denominators (√0.125 + √0.375).
        let p1 = prob(&[0.25, 0.75]);
        let p2 = prob(&[0.75, 0.25]);
        let a = 0.125f64.sqrt() + 0.375f64.sqrt();
        let expected = 2.0 * (0.25f64 * 0.75).sqrt() / (a * a) - 1.0;
        let rho = fin(hellinger_codiv(&p0, &p1, &p2).unwrap());
        assert!((rho - expected).abs() < 1e-15);
        let r = fin(r_phi(&p0, &p1, &p2, &PhiFunction::sqrt()).unwrap());
        assert!((rho - r).abs() < 1e-15);
    }

    #[test]
    fn hellinger_finite_without_domination() {
        let p0 = prob(&[0.5, 0.5, 0.0]);
        let p1 = prob(&[0.25, 0.25, 0.5]);
        assert!(hellinger_codiv(&p0, &p1, &p1).unwrap().is_finite());
        assert_eq!(chi2_codiv(&p0, &p1, &p1).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn alpha_specialisations() {
        let p0 = prob(&[0.2, 0.3, 0.5]);
        let p1 = prob(&[0.1, 0.6, 0.3]);
        let p2 = prob(&[0.4, 0.4, 0.2]);
        let r1 = fin(r_alpha(&p0, &p1, &p2, 1.0).unwrap());
        assert!((r1 - fin(chi2_codiv(&p0, &p1, &p2).unwrap())).abs() < 1e-14);
        let rh = fin(r_alpha(&p0, &p1, &p2, 0.5).unwrap());
        assert!((rh - fin(hellinger_codiv(&p0, &p1, &p2).unwrap())).abs() < 1e-14);
        for alpha in [0.25, 0.5, 1.0, 2.0] {
            assert_eq!(fin(r_alpha(&p0, &p0, &p0, alpha).unwrap()), 0.0);
            assert_eq!(fin(v_alpha(&p0, &p0, &p0, alpha).unwrap()), 0.0);
        }
        assert!(r_alpha(&p0, &p1, &p2, 0.0).is_err());
    }

    #[test]
    fn classical_chi2_matches_diagonal() {
        let p0 = prob(&[0.2, 0.3, 0.5]);
        let p1 = prob(&[0.1, 0.6, 0.3]);
        let d = fin(chi2_divergence(&p1, &p0).unwrap());
        let c = fin(chi2_codiv(&p0, &p1, &p1).unwrap());
        assert!((d - c).abs() < 1e-15);
    }

    #[test]
    fn zero_null_points_are_ignored() {
        let p0 = prob(&[0.5, 0.5, 0.0]);
        let p1 = prob(&[0.25, 0.75, 0.0]);
        let q0 = prob(&[0.5, 0.5]);
        let q1 = prob(&[0.25, 0.75]);
        let id = PhiFunction::identity();
        assert_eq!(v_phi(&p0, &p1, &p1, &id).unwrap(), v_phi(&q0, &q1, &q1, &id).unwrap());
    }
}
