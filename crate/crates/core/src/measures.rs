//! Finite discrete measures.
//!
//! Every measure lives on a support `{0, .., n-1}` with the counting measure
//! as dominating measure, so densities are plain mass vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::summation::kahan_sum;

/// Tolerance on `|Σ mass − 1|` for a probability measure.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Tolerance on `|Σ mass|` for a zero-mass perturbation.
pub const ZERO_MASS_TOL: f64 = 1e-12;

/// A nonnegative finite measure on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct DiscreteMeasure {
    mass: Vec<f64>,
}

/// A finite signed measure on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct SignedMeasure {
    mass: Vec<f64>,
}

/// Wire format shared by both measure types: `{"support": N, "mass": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureJson {
    pub support: usize,
    pub mass: Vec<crate::extreal::Fixed>,
}

impl DiscreteMeasure {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::EmptySupport);
        }
        if let Some((index, &value)) = mass.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidMass { index, value });
        }
        Ok(Self { mass })
    }

    /// Builds a measure and checks that it has unit total mass.
    pub fn probability(mass: Vec<f64>) -> Result<Self> {
        let m = Self::new(mass)?;
        m.require_probability()?;
        Ok(m)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySupport);
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn support_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.mass.iter().copied())
    }

    pub fn is_probability(&self) -> bool {
        (self.total() - 1.0).abs() <= PROBABILITY_TOL
    }

    pub fn require_probability(&self) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() <= PROBABILITY_TOL {
            Ok(())
        } else {
            Err(Error::NotProbability { total })
        }
    }

    pub fn to_signed(&self) -> SignedMeasure {
        SignedMeasure { mass: self.mass.clone() }
    }

    /// `self + t·mu`, failing if any resulting mass is negative.
    pub fn perturbed(&self, mu: &SignedMeasure, t: f64) -> Result<DiscreteMeasure> {
        same_support(self.support_size(), mu.support_size())?;
        let mass = self
            .mass
            .iter()
            .zip(&mu.mass)
            .map(|(p, m)| p + t * m)
            .collect::<Vec<_>>();
        DiscreteMeasure::new(clamp_roundoff(mass))
    }
}

/// Masses in `[-1e-15, 0)` are rounding residue of an exact zero.
fn clamp_roundoff(mut mass: Vec<f64>) -> Vec<f64> {
    for m in &mut mass {
        if *m < 0.0 && *m >= -1e-15 {
            *m = 0.0;
        }
    }
    mass
}

impl SignedMeasure {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::EmptySupport);
        }
        if let Some((index, &value)) = mass.iter().enumerate().find(|(_, m)| !m.is_finite()) {
            return Err(Error::InvalidMass { index, value });
        }
        Ok(Self { mass })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn support_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.mass.iter().copied())
    }

    pub fn require_zero_total(&self) -> Result<()> {
        let total = self.total();
        if total.abs() <= ZERO_MASS_TOL {
            Ok(())
        } else {
            Err(Error::NonzeroTotalMass { total })
        }
    }

    pub fn scaled(&self, c: f64) -> SignedMeasure {
        SignedMeasure { mass: self.mass.iter().map(|m| c * m).collect() }
    }

    /// Linear combination `Σ c_j μ_j` of measures sharing a support.
    pub fn combination<'a, I>(n: usize, terms: I) -> Result<SignedMeasure>
    where
        I: IntoIterator<Item = (f64, &'a [f64])>,
    {
        let mut mass = vec![0.0; n];
        for (c, m) in terms {
            same_support(n, m.len())?;
            for (acc, x) in mass.iter_mut().zip(m) {
                *acc += c * x;
            }
        }
        SignedMeasure::new(mass)
    }
}

impl From<DiscreteMeasure> for SignedMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        SignedMeasure { mass: m.mass }
    }
}

impl TryFrom<MeasureJson> for DiscreteMeasure {
    type Error = Error;

    fn try_from(j: MeasureJson) -> Result<Self> {
        same_support(j.support, j.mass.len())?;
        DiscreteMeasure::new(j.mass.into_iter().map(|f| f.0).collect())
    }
}

impl From<DiscreteMeasure> for MeasureJson {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureJson { support: m.mass.len(), mass: m.mass.into_iter().map(crate::extreal::Fixed).collect() }
    }
}

impl TryFrom<MeasureJson> for SignedMeasure {
    type Error = Error;

    fn try_from(j: MeasureJson) -> Result<Self> {
        same_support(j.support, j.mass.len())?;
        SignedMeasure::new(j.mass.into_iter().map(|f| f.0).collect())
    }
}

impl From<SignedMeasure> for MeasureJson {
    fn from(m: SignedMeasure) -> Self {
        MeasureJson { support: m.mass.len(), mass: m.mass.into_iter().map(crate::extreal::Fixed).collect() }
    }
}

pub(crate) fn same_support(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// Density `dμ/dP0` on each support point, with `±∞` where `μ` charges a
/// `P0`-null point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRatio {
    pub values: Vec<f64>,
    pub dominated: bool,
}

/// True iff every `p0`-null point is also `mu`-null.
pub fn dominated_by(mu: &SignedMeasure, p0: &DiscreteMeasure) -> Result<bool> {
    same_support(p0.support_size(), mu.support_size())?;
    Ok(first_undominated(mu.mass(), p0.mass()).is_none())
}

pub(crate) fn first_undominated(mu: &[f64], p0: &[f64]) -> Option<usize> {
    mu.iter().zip(p0).position(|(&m, &p)| p == 0.0 && m != 0.0)
}

pub fn density_ratio(mu: &SignedMeasure, p0: &DiscreteMeasure) -> Result<DensityRatio> {
    same_support(p0.support_size(), mu.support_size())?;
    let mut dominated = true;
    let values = mu
        .mass()
        .iter()
        .zip(p0.mass())
        .map(|(&m, &p)| {
            if p > 0.0 {
                m / p
            } else if m == 0.0 {
                0.0
            } else {
                dominated = false;
                if m > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
        })
        .collect();
    Ok(DensityRatio { values, dominated })
}

/// Jordan decomposition `μ = α₊μ₊ − α₋μ₋` with orthogonal probability parts.
///
/// When `α₊` (resp. `α₋`) is zero the corresponding part is the uniform
/// measure, which carries no information; branch on the weight.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanDecomposition {
    pub alpha_plus: f64,
    pub mu_plus: DiscreteMeasure,
    pub alpha_minus: f64,
    pub mu_minus: DiscreteMeasure,
}

impl JordanDecomposition {
    /// Reassembles `α₊μ₊ − α₋μ₋`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.mu_plus.support_size();
        (0..n)
            .map(|i| {
                let plus = if self.alpha_plus > 0.0 { self.alpha_plus * self.mu_plus.mass()[i] } else { 0.0 };
                let minus = if self.alpha_minus > 0.0 { self.alpha_minus * self.mu_minus.mass()[i] } else { 0.0 };
                plus - minus
            })
            .collect()
    }
}

pub fn jordan_decompose(mu: &SignedMeasure) -> JordanDecomposition {
    let n = mu.support_size();
    let positive: Vec<f64> = mu.mass().iter().map(|&m| m.max(0.0)).collect();
    let negative: Vec<f64> = mu.mass().iter().map(|&m| (-m).max(0.0)).collect();
    let part = |v: Vec<f64>| {
        let alpha = kahan_sum(v.iter().copied());
        let measure = if alpha > 0.0 {
            DiscreteMeasure { mass: v.into_iter().map(|x| x / alpha).collect() }
        } else {
            DiscreteMeasure { mass: vec![1.0 / n as f64; n] }
        };
        (alpha, measure)
    };
    let (alpha_plus, mu_plus) = part(positive);
    let (alpha_minus, mu_minus) = part(negative);
    JordanDecomposition { alpha_plus, mu_plus, alpha_minus, mu_minus }
}

/// `ess sup_{P0} |dμ/dP0|` for a zero-mass perturbation dominated by `p0`.
pub fn ess_sup_ratio(mu: &SignedMeasure, p0: &DiscreteMeasure) -> Result<ExtReal> {
    same_support(p0.support_size(), mu.support_size())?;
    if let Some(index) = first_undominated(mu.mass(), p0.mass()) {
        return Err(Error::NotDominated { index });
    }
    mu.require_zero_total()?;
    let sup = mu
        .mass()
        .iter()
        .zip(p0.mass())
        .filter(|(_, &p)| p > 0.0)
        .map(|(&m, &p)| (m / p).abs())
        .fold(0.0, f64::max);
    Ok(ExtReal::Finite(sup))
}

/// Largest `a` such that `p0 + tμ` is a probability measure for all `|t| ≤ a`.
pub fn validity_radius(mu: &SignedMeasure, p0: &DiscreteMeasure) -> Result<ExtReal> {
    let sup = ess_sup_ratio(mu, p0)?.to_f64();
    Ok(if sup == 0.0 { ExtReal::PosInf } else { ExtReal::Finite(1.0 / sup) })
}

/// Whether `p0 + tμ` is a probability measure up to `tol` of negative mass.
pub fn is_valid_perturbation(p0: &DiscreteMeasure, mu: &SignedMeasure, t: f64, tol: f64) -> bool {
    if p0.support_size() != mu.support_size() {
        return false;
    }
    let mut total = 0.0;
    for (p, m) in p0.mass().iter().zip(mu.mass()) {
        let x = p + t * m;
        if x < -tol {
            return false;
        }
        total += x;
    }
    (total - 1.0).abs() <= PROBABILITY_TOL.max(tol)
}
