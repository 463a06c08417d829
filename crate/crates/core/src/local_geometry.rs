//! Local geometry around a reference measure: the inner product
//! `⟨μ, μ̃⟩_{P0} = Σ μ μ̃ / p0` on zero-mass perturbations, its Gram matrix,
//! and numerical checks of the bilinear expansion
//!
//! ```text
//! D(P0 | P0 + tμ, P0 + sμ̃) = t s φ'(1)² ⟨μ, μ̃⟩_{P0} + o(t² + s²).
//! ```

use serde::Serialize;

use crate::codiv::{hellinger_codiv, r_phi, v_phi, PhiFunction};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::linalg::{least_squares, Matrix};
use crate::measures::{first_undominated, same_support, validity_radius, DiscreteMeasure, SignedMeasure};
use crate::summation::KahanSum;

/// Two admissible perturbation directions at a reference measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPair {
    pub mu: SignedMeasure,
    pub mu_tilde: SignedMeasure,
    pub reference: DiscreteMeasure,
}

fn check_direction(p0: &DiscreteMeasure, mu: &SignedMeasure) -> Result<()> {
    same_support(p0.support_size(), mu.support_size())?;
    mu.require_zero_total()?;
    if let Some(index) = first_undominated(mu.mass(), p0.mass()) {
        return Err(Error::NotDominated { index });
    }
    Ok(())
}

impl PerturbationPair {
    pub fn new(reference: DiscreteMeasure, mu: SignedMeasure, mu_tilde: SignedMeasure) -> Result<Self> {
        reference.require_probability()?;
        check_direction(&reference, &mu)?;
        check_direction(&reference, &mu_tilde)?;
        Ok(Self { mu, mu_tilde, reference })
    }
}

fn inner(p0: &DiscreteMeasure, a: &SignedMeasure, b: &SignedMeasure) -> f64 {
    let mut s = KahanSum::new();
    for ((&p, &x), &y) in p0.mass().iter().zip(a.mass()).zip(b.mass()) {
        if p > 0.0 {
            s.add(x * y / p);
        }
    }
    s.value()
}

/// `⟨μ, μ̃⟩_{P0}`.
pub fn fisher_inner(pair: &PerturbationPair) -> f64 {
    inner(&pair.reference, &pair.mu, &pair.mu_tilde)
}

/// Gram matrix `(⟨μ_i, μ_j⟩_{P0})_{i,j}`.
pub fn fisher_gram(p0: &DiscreteMeasure, mus: &[SignedMeasure]) -> Result<Matrix> {
    p0.require_probability()?;
    for mu in mus {
        check_direction(p0, mu)?;
    }
    let m = mus.len();
    let mut g = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = inner(p0, &mus[i], &mus[j]);
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    Ok(g)
}

/// Geometric grid of step sizes `h_k = base · factor^k` and directions
/// `(t, s) = h_k (cos θ_i, sin θ_i)` with `θ_i = 2πi/directions`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionGrid {
    /// `None` uses a tenth of the validity radius.
    pub base_step: Option<f64>,
    pub factor: f64,
    pub levels: usize,
    pub directions: usize,
}

impl Default for ExpansionGrid {
    fn default() -> Self {
        Self { base_step: None, factor: 0.5, levels: 5, directions: 16 }
    }
}

/// Residuals below this are treated as exact zeros.
pub const EXACT_RESIDUAL: f64 = 1e-14;

/// Largest allowed ratio between successive residual ratios.
pub const DECAY_FACTOR: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionVerdict {
    /// Every residual is at rounding level.
    Exact,
    /// `ratio_{k+1} ≤ 0.6 ratio_k` at every level.
    Decaying,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionSeries {
    pub steps: Vec<f64>,
    /// `max_θ |D − t s φ'(1)² ⟨μ, μ̃⟩| / (t² + s²)` at each step.
    pub residual_ratios: Vec<f64>,
    pub max_residual: f64,
    /// `ratio_{k+1} / ratio_k`.
    pub decay_factors: Vec<f64>,
    /// Mixed second difference at the finest step, an estimate of the
    /// coefficient of `ts`.
    pub leading_coefficient: f64,
    pub verdict: ExpansionVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub phi: String,
    pub fisher_inner: f64,
    /// `φ'(1)² ⟨μ, μ̃⟩_{P0}`.
    pub expected_coefficient: f64,
    pub radius: ExtReal,
    pub vphi: ExpansionSeries,
    pub rphi: ExpansionSeries,
}

impl ExpansionReport {
    pub fn passed(&self) -> bool {
        self.vphi.verdict != ExpansionVerdict::Failed && self.rphi.verdict != ExpansionVerdict::Failed
    }
}

fn series(
    steps: &[f64],
    directions: usize,
    expected: f64,
    eval: &dyn Fn(f64, f64) -> Result<f64>,
) -> Result<ExpansionSeries> {
    let mut residual_ratios = Vec::with_capacity(steps.len());
    let mut max_residual = 0.0f64;
    for &h in steps {
        let mut worst = 0.0f64;
        for i in 0..directions {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / directions as f64;
            let (t, s) = (h * theta.cos(), h * theta.sin());
            let residual = (eval(t, s)? - t * s * expected).abs();
            max_residual = max_residual.max(residual);
            worst = worst.max(residual / (t * t + s * s));
        }
        residual_ratios.push(worst);
    }
    let decay_factors: Vec<f64> = residual_ratios.windows(2).map(|w| w[1] / w[0]).collect();
    let verdict = if max_residual <= EXACT_RESIDUAL {
        ExpansionVerdict::Exact
    } else if decay_factors.iter().all(|&f| f <= DECAY_FACTOR) {
        ExpansionVerdict::Decaying
    } else {
        ExpansionVerdict::Failed
    };
    let h = *steps.last().expect("at least one level");
    let leading_coefficient = (eval(h, h)? - eval(h, -h)? - eval(-h, h)? + eval(-h, -h)?) / (4.0 * h * h);
    Ok(ExpansionSeries { steps: steps.to_vec(), residual_ratios, max_residual, decay_factors, leading_coefficient, verdict })
}

/// Checks the bilinear expansion of `V_φ` and `R_φ` along a shrinking grid.
pub fn expansion_check(
    p0: &DiscreteMeasure,
    mu: &SignedMeasure,
    mu_tilde: &SignedMeasure,
    phi: &PhiFunction,
    grid: &ExpansionGrid,
) -> Result<ExpansionReport> {
    let pair = PerturbationPair::new(p0.clone(), mu.clone(), mu_tilde.clone())?;
    if grid.levels < 2 || grid.directions < 4 || !(grid.factor > 0.0 && grid.factor < 1.0) {
        return Err(Error::InvalidParameter("expansion grid needs >= 2 levels, >= 4 directions, factor in (0, 1)".into()));
    }
    let r1 = validity_radius(mu, p0)?;
    let r2 = validity_radius(mu_tilde, p0)?;
    let radius = match (r1, r2) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a.min(b)),
        (ExtReal::Finite(a), _) | (_, ExtReal::Finite(a)) => ExtReal::Finite(a),
        _ => ExtReal::PosInf,
    };
    let base = match grid.base_step {
        Some(h) => h,
        None => 0.1 * radius.finite().unwrap_or(1.0),
    };
    if let ExtReal::Finite(r) = radius {
        if !(base <= r) {
            return Err(Error::OutsideValidityRadius { step: base, radius: r });
        }
    }
    if !(base > 0.0) {
        return Err(Error::InvalidParameter(format!("base step must be positive, got {base}")));
    }
    let steps: Vec<f64> = (0..grid.levels).map(|k| base * grid.factor.powi(k as i32)).collect();
    let fisher = fisher_inner(&pair);
    let expected = phi.dphi_at_one().powi(2) * fisher;
    let at = |t: f64, s: f64| -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        Ok(((p0.perturbed(mu, t))?, (p0.perturbed(mu_tilde, s))?))
    };
    let v_eval = |t: f64, s: f64| -> Result<f64> {
        let (p1, p2) = at(t, s)?;
        v_phi(p0, &p1, &p2, phi)?.finite().ok_or(Error::InfiniteEntries)
    };
    let r_eval = |t: f64, s: f64| -> Result<f64> {
        let (p1, p2) = at(t, s)?;
        r_phi(p0, &p1, &p2, phi)?.finite().ok_or(Error::InfiniteEntries)
    };
    Ok(ExpansionReport {
        phi: phi.name().to_string(),
        fisher_inner: fisher,
        expected_coefficient: expected,
        radius,
        vphi: series(&steps, grid.directions, expected, &v_eval)?,
        rphi: series(&steps, grid.directions, expected, &r_eval)?,
    })
}

/// Grid for the off-support Hellinger fit: `t, s ∈ scale · points`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffSupportGrid {
    pub scale: f64,
    pub points: Vec<f64>,
}

impl Default for OffSupportGrid {
    fn default() -> Self {
        Self { scale: 1e-3, points: vec![0.25, 0.5, 0.75, 1.0] }
    }
}

/// Relative tolerance of the off-support coefficient recovery.
pub const OFF_SUPPORT_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffSupportReport {
    /// `Σ_{x ∉ supp P0} √(μ1 μ2)`.
    pub expected_sqrt_coefficient: f64,
    /// `(Σ_{supp P0} μ1 μ2 / p0 − m1 m2) / 4` with `m_i = μ_i(supp(P0)^c)`.
    pub expected_ts_coefficient: f64,
    pub fitted_sqrt_coefficient: f64,
    pub fitted_ts_coefficient: f64,
    pub sqrt_relative_error: f64,
    pub ts_relative_error: f64,
    pub passed: bool,
}

fn fit_off_support(p0: &DiscreteMeasure, mu1: &SignedMeasure, mu2: &SignedMeasure, scale: f64, points: &[f64]) -> Result<Vec<f64>> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for &a in points {
        for &b in points {
            let (t, s) = (scale * a, scale * b);
            let r = (t * s).sqrt();
            rows.push(vec![r, t * s, t * r, s * r]);
            let rho = hellinger_codiv(p0, &p0.perturbed(mu1, t)?, &p0.perturbed(mu2, s)?)?;
            y.push(rho.finite().ok_or(Error::InfiniteEntries)?);
        }
    }
    least_squares(&Matrix::from_rows(&rows), &y)
        .ok_or_else(|| Error::InvalidParameter("off-support grid does not identify the expansion".into()))
}

/// Recovers the coefficients of `√(ts)` and `ts` in the Hellinger
/// codivergence for perturbations that charge `P0`-null points.
///
/// The model `a√(ts) + b ts + c t√(ts) + d s√(ts)` is fitted on the grid at
/// `scale` and at `scale/2`, and the two fits are combined by Richardson
/// extrapolation to remove the next-order bias.
pub fn hellinger_off_support_check(
    p0: &DiscreteMeasure,
    mu1: &SignedMeasure,
    mu2: &SignedMeasure,
    grid: &OffSupportGrid,
) -> Result<OffSupportReport> {
    p0.require_probability()?;
    let n = p0.support_size();
    for (name, mu) in [("mu1", mu1), ("mu2", mu2)] {
        same_support(n, mu.support_size())?;
        mu.require_zero_total()?;
        let mut on_support = false;
        for (x, (&m, &p)) in mu.mass().iter().zip(p0.mass()).enumerate() {
            if p == 0.0 && m < 0.0 {
                return Err(Error::SupportCondition(format!("{name} is negative at the P0-null point {x}")));
            }
            on_support |= p > 0.0 && m != 0.0;
        }
        if !on_support {
            return Err(Error::SupportCondition(format!("{name} does not charge the support of P0")));
        }
    }
    if grid.points.len() < 2 || grid.points.iter().any(|&p| !(p > 0.0)) || !(grid.scale > 0.0) {
        return Err(Error::InvalidParameter("off-support grid needs >= 2 positive points".into()));
    }
    // P0 + tμ stays a measure for 0 ≤ t ≤ 1/max_{supp P0} (−μ/p0).
    let top = grid.scale * grid.points.iter().copied().fold(0.0, f64::max);
    for mu in [mu1, mu2] {
        let worst = mu.mass().iter().zip(p0.mass()).filter(|(_, &p)| p > 0.0).map(|(&m, &p)| -m / p).fold(0.0, f64::max);
        if worst > 0.0 && top > 1.0 / worst {
            return Err(Error::OutsideValidityRadius { step: top, radius: 1.0 / worst });
        }
    }

    let mut sqrt_coef = KahanSum::new();
    let mut inside = KahanSum::new();
    let (mut m1, mut m2) = (0.0, 0.0);
    for ((&p, &a), &b) in p0.mass().iter().zip(mu1.mass()).zip(mu2.mass()) {
        if p > 0.0 {
            inside.add(a * b / p);
        } else {
            sqrt_coef.add((a * b).sqrt());
            m1 += a;
            m2 += b;
        }
    }
    let expected_sqrt = sqrt_coef.value();
    let expected_ts = 0.25 * (inside.value() - m1 * m2);

    let coarse = fit_off_support(p0, mu1, mu2, grid.scale, &grid.points)?;
    let fine = fit_off_support(p0, mu1, mu2, 0.5 * grid.scale, &grid.points)?;
    let fitted_sqrt = 2.0 * fine[0] - coarse[0];
    let fitted_ts = 2.0 * fine[1] - coarse[1];
    // Floor the denominators: a vanishing coefficient is judged absolutely.
    let sqrt_relative_error = (fitted_sqrt - expected_sqrt).abs() / expected_sqrt.abs().max(1e-3);
    let ts_relative_error = (fitted_ts - expected_ts).abs() / expected_ts.abs().max(1e-3);
    Ok(OffSupportReport {
        expected_sqrt_coefficient: expected_sqrt,
        expected_ts_coefficient: expected_ts,
        fitted_sqrt_coefficient: fitted_sqrt,
        fitted_ts_coefficient: fitted_ts,
        sqrt_relative_error,
        ts_relative_error,
        passed: sqrt_relative_error <= OFF_SUPPORT_TOL && ts_relative_error <= OFF_SUPPORT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob(m: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::probability(m.to_vec()).unwrap()
    }

    fn signed(m: &[f64]) -> SignedMeasure {
        SignedMeasure::new(m.to_vec()).unwrap()
    }

    #[test]
    fn fisher_inner_examples() {
        let p0 = prob(&[0.5, 0.5]);
        let mu = signed(&[0.5, -0.5]);
        let pair = PerturbationPair::new(p0.clone(), mu.clone(), mu.clone()).unwrap();
        assert!((fisher_inner(&pair) - 1.0).abs() < 1e-15);
        let pair = PerturbationPair::new(p0, mu, signed(&[0.0, 0.0])).unwrap();
        assert_eq!(fisher_inner(&pair), 0.0);
        let u3 = DiscreteMeasure::uniform(3).unwrap();
        let pair = PerturbationPair::new(u3, signed(&[0.1, -0.1, 0.0]), signed(&[0.0, 0.1, -0.1])).unwrap();
        assert!((fisher_inner(&pair) + 0.03).abs() < 1e-15);
    }

    #[test]
    fn pair_validation() {
        let p0 = prob(&[1.0, 0.0]);
        assert!(matches!(
            PerturbationPair::new(p0.clone(), signed(&[-0.5, 0.5]), signed(&[0.0, 0.0])),
            Err(Error::NotDominated { index: 1 })
        ));
        assert!(matches!(
            PerturbationPair::new(prob(&[0.5, 0.5]), signed(&[0.5, 0.0]), signed(&[0.0, 0.0])),
            Err(Error::NonzeroTotalMass { .. })
        ));
    }

    #[test]
    fn gram_examples() {
        let p0 = prob(&[0.5, 0.5]);
        let mu = signed(&[0.5, -0.5]);
        let g = fisher_gram(&p0, std::slice::from_ref(&mu)).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-15);
        let g = fisher_gram(&p0, &[mu.clone(), mu.scaled(-1.0)]).unwrap();
        assert!((g.get(0, 1) + 1.0).abs() < 1e-15 && (g.get(1, 1) - 1.0).abs() < 1e-15);
        assert_eq!(crate::linalg::numerical_rank(&g, crate::linalg::RANK_TOL), 1);
        let u4 = DiscreteMeasure::uniform(4).unwrap();
        let g = fisher_gram(&u4, &[signed(&[0.1, -0.1, 0.0, 0.0]), signed(&[0.0, 0.0, 0.2, -0.2])]).unwrap();
        assert_eq!(g.get(0, 1), 0.0);
    }

    fn sample_pair() -> (DiscreteMeasure, SignedMeasure, SignedMeasure) {
        (prob(&[0.1, 0.2, 0.3, 0.4]), signed(&[0.05, -0.1, 0.02, 0.03]), signed(&[-0.04, 0.01, 0.05, -0.02]))
    }

    #[test]
    fn chi2_expansion_is_exact() {
        let (p0, mu, nu) = sample_pair();
        let r = expansion_check(&p0, &mu, &nu, &PhiFunction::identity(), &ExpansionGrid::default()).unwrap();
        assert_eq!(r.vphi.verdict, ExpansionVerdict::Exact);
        assert_eq!(r.rphi.verdict, ExpansionVerdict::Exact);
    }

    #[test]
    fn hellinger_expansion_quarter_coefficient() {
        let (p0, mu, nu) = sample_pair();
        let r = expansion_check(&p0, &mu, &nu, &PhiFunction::sqrt(), &ExpansionGrid::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.rphi.verdict, ExpansionVerdict::Decaying);
        let quarter = r.fisher_inner / 4.0;
        assert!((r.expected_coefficient - quarter).abs() < 1e-15);
        assert!((r.rphi.leading_coefficient - quarter).abs() < 0.01 * quarter.abs());
    }

    #[test]
    fn power_expansion_decays() {
        let (p0, mu, nu) = sample_pair();
        let r = expansion_check(&p0, &mu, &nu, &PhiFunction::power(0.25).unwrap(), &ExpansionGrid::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn zero_direction_gives_vanishing_codivergence() {
        let (p0, mu, _) = sample_pair();
        let r = expansion_check(&p0, &mu, &SignedMeasure::zero(4).unwrap(), &PhiFunction::sqrt(), &ExpansionGrid::default()).unwrap();
        assert!(r.passed());
        assert!(r.vphi.residual_ratios.iter().all(|&x| x < 1e-10));
    }

    #[test]
    fn step_outside_radius() {
        let (p0, mu, nu) = sample_pair();
        let grid = ExpansionGrid { base_step: Some(10.0), ..ExpansionGrid::default() };
        assert!(matches!(
            expansion_check(&p0, &mu, &nu, &PhiFunction::sqrt(), &grid),
            Err(Error::OutsideValidityRadius { .. })
        ));
    }

    #[test]
    fn gram_matches_expansion_coefficients() {
        let (p0, mu, nu) = sample_pair();
        let g = fisher_gram(&p0, &[mu.clone(), nu.clone()]).unwrap();
        let phi = PhiFunction::power(0.7).unwrap();
        let r = expansion_check(&p0, &mu, &nu, &phi, &ExpansionGrid::default()).unwrap();
        let recovered = r.vphi.leading_coefficient / phi.dphi_at_one().powi(2);
        assert!((recovered - g.get(0, 1)).abs() < 0.01 * g.get(0, 1).abs());
    }

    #[test]
    fn two_point_off_support_instance() {
        // ρ = √(ts)/√((1−t)(1−s)): coefficients 1 and 0.
        let p0 = prob(&[1.0, 0.0]);
        let mu = signed(&[-1.0, 1.0]);
        let r = hellinger_off_support_check(&p0, &mu, &mu, &OffSupportGrid::default()).unwrap();
        assert!((r.expected_sqrt_coefficient - 1.0).abs() < 1e-15);
        assert!(r.expected_ts_coefficient.abs() < 1e-15);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn off_support_recovers_both_coefficients() {
        let p0 = prob(&[0.3, 0.3, 0.4, 0.0, 0.0]);
        let mu1 = signed(&[-0.5, 0.2, -0.3, 0.4, 0.2]);
        let mu2 = signed(&[0.1, -0.6, -0.2, 0.3, 0.4]);
        let r = hellinger_off_support_check(&p0, &mu1, &mu2, &OffSupportGrid::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.sqrt_relative_error < 1e-3 && r.ts_relative_error < 1e-3, "{r:?}");
    }

    #[test]
    fn inside_support_reduces_to_plain_expansion() {
        let (p0, mu, nu) = sample_pair();
        let r = hellinger_off_support_check(&p0, &mu, &nu, &OffSupportGrid::default()).unwrap();
        assert_eq!(r.expected_sqrt_coefficient, 0.0);
        let pair = PerturbationPair::new(p0, mu, nu).unwrap();
        assert!((r.expected_ts_coefficient - fisher_inner(&pair) / 4.0).abs() < 1e-15);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn symmetric_diagonal_fit() {
        // t = s: ρ ≈ t·a + t²·b.
        let p0 = prob(&[0.5, 0.5, 0.0]);
        let mu = signed(&[-0.3, -0.2, 0.5]);
        let r = hellinger_off_support_check(&p0, &mu, &mu, &OffSupportGrid::default()).unwrap();
        let ts: Vec<f64> = [1e-4, 2e-4, 4e-4].to_vec();
        for t in ts {
            let rho = hellinger_codiv(&p0, &p0.perturbed(&mu, t).unwrap(), &p0.perturbed(&mu, t).unwrap()).unwrap().to_f64();
            let model = t * r.expected_sqrt_coefficient + t * t * r.expected_ts_coefficient;
            assert!((rho - model).abs() < 4.0 * t.powi(2), "{rho} vs {model}");
        }
    }

    #[test]
    fn off_support_condition_violations() {
        let p0 = prob(&[0.5, 0.5, 0.0]);
        assert!(matches!(
            hellinger_off_support_check(&p0, &signed(&[0.3, 0.2, -0.5]), &signed(&[0.3, -0.3, 0.0]), &OffSupportGrid::default()),
            Err(Error::SupportCondition(_))
        ));
    }
}
