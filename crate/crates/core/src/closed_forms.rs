//! Closed-form `R_α` for parametric families.
//!
//! Every formula has the shape `exp(E) − 1` (or a product of such ratios),
//! so the exponent `E` is accumulated in log space and mapped back with
//! `expm1`; products over independent coordinates combine through
//! `∏(R_ℓ + 1) − 1`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::extreal::{ExtReal, Fixed};

/// Named log-partition functions, the serializable part of [`GenericExpFam`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogPartition {
    /// `A(θ) = ‖θ‖²/(2σ²)`, natural parameter equal to the mean.
    Gaussian,
    /// `A(θ) = Σ e^{θ_ℓ}`, `θ = ln λ`.
    Poisson,
    /// `A(β) = Σ ln(1 + e^{β_ℓ})`, `β = logit θ`.
    Bernoulli,
    /// `A(θ) = −Σ ln(−θ_ℓ)`, `θ = −β`, domain `θ < 0`.
    Exponential,
    /// `A(θ) = Σ lnΓ(θ_a + 1) − (θ_a + 1) ln(−θ_b)` on interleaved pairs
    /// `(θ_a, θ_b) = (shape − 1, −rate)`, domain `θ_a > −1`, `θ_b < 0`.
    Gamma,
}

type LogPartitionFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type DomainFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// An exponential family given by its natural parameter and log-partition.
///
/// Callbacks must be pure.
#[derive(Clone)]
pub struct GenericExpFam {
    pub theta: Vec<f64>,
    name: String,
    named: Option<(LogPartition, f64)>,
    log_partition: Arc<LogPartitionFn>,
    domain: Arc<DomainFn>,
}

impl fmt::Debug for GenericExpFam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericExpFam").field("name", &self.name).field("theta", &self.theta).finish()
    }
}

impl PartialEq for GenericExpFam {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.named == other.named && self.theta == other.theta
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl GenericExpFam {
    pub fn custom<A, D>(name: impl Into<String>, theta: Vec<f64>, log_partition: A, domain: D) -> Self
    where
        A: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        D: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Self { theta, name: name.into(), named: None, log_partition: Arc::new(log_partition), domain: Arc::new(domain) }
    }

    /// `sigma` is only read by [`LogPartition::Gaussian`].
    pub fn named(kind: LogPartition, theta: Vec<f64>, sigma: f64) -> Self {
        let (a, d): (Arc<LogPartitionFn>, Arc<DomainFn>) = match kind {
            LogPartition::Gaussian => {
                let s2 = sigma * sigma;
                (Arc::new(move |t: &[f64]| t.iter().map(|x| x * x).sum::<f64>() / (2.0 * s2)), Arc::new(|_: &[f64]| true))
            }
            LogPartition::Poisson => (Arc::new(|t: &[f64]| t.iter().map(|x| x.exp()).sum()), Arc::new(|_: &[f64]| true)),
            LogPartition::Bernoulli => {
                (Arc::new(|t: &[f64]| t.iter().map(|&x| softplus(x)).sum()), Arc::new(|_: &[f64]| true))
            }
            LogPartition::Exponential => (
                Arc::new(|t: &[f64]| t.iter().map(|x| -(-x).ln()).sum()),
                Arc::new(|t: &[f64]| t.iter().all(|&x| x < 0.0)),
            ),
            LogPartition::Gamma => (
                Arc::new(|t: &[f64]| t.chunks(2).map(|c| ln_gamma(c[0] + 1.0) - (c[0] + 1.0) * (-c[1]).ln()).sum()),
                Arc::new(|t: &[f64]| t.len().is_multiple_of(2) && t.chunks(2).all(|c| c[0] > -1.0 && c[1] < 0.0)),
            ),
        };
        let name = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        Self { theta, name, named: Some((kind, sigma)), log_partition: a, domain: d }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn log_partition(&self, theta: &[f64]) -> f64 {
        (self.log_partition)(theta)
    }

    pub fn in_domain(&self, theta: &[f64]) -> bool {
        theta.iter().all(|x| x.is_finite()) && (self.domain)(theta)
    }

    /// Same log-partition function (custom callbacks compare by name).
    fn compatible(&self, other: &Self) -> bool {
        self.name == other.name && self.named == other.named
    }
}

/// A parametric family member, possibly a product over coordinates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "FamilyJson")]
pub enum ParamFamily {
    GaussianIso { mean: Vec<f64>, sigma: f64 },
    PoissonProd { lambda: Vec<f64> },
    BernoulliProd { theta: Vec<f64> },
    ExponentialProd { rate: Vec<f64> },
    GammaProd { shape: Vec<f64>, rate: Vec<f64> },
    GenericExpFam(GenericExpFam),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
enum FamilyJson {
    GaussianIso {
        mean: Vec<Fixed>,
        sigma: Fixed,
    },
    PoissonProd {
        lambda: Vec<Fixed>,
    },
    BernoulliProd {
        theta: Vec<Fixed>,
    },
    ExponentialProd {
        #[serde(alias = "rate")]
        beta: Vec<Fixed>,
    },
    GammaProd {
        shape: Vec<Fixed>,
        rate: Vec<Fixed>,
    },
    GenericExpFam {
        log_partition: LogPartition,
        theta: Vec<Fixed>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Fixed>,
    },
}

fn unfix(v: Vec<Fixed>) -> Vec<f64> {
    v.into_iter().map(|f| f.0).collect()
}

fn fix(v: &[f64]) -> Vec<Fixed> {
    v.iter().copied().map(Fixed).collect()
}

impl TryFrom<FamilyJson> for ParamFamily {
    type Error = Error;

    fn try_from(j: FamilyJson) -> Result<Self> {
        let f = match j {
            FamilyJson::GaussianIso { mean, sigma } => ParamFamily::GaussianIso { mean: unfix(mean), sigma: sigma.0 },
            FamilyJson::PoissonProd { lambda } => ParamFamily::PoissonProd { lambda: unfix(lambda) },
            FamilyJson::BernoulliProd { theta } => ParamFamily::BernoulliProd { theta: unfix(theta) },
            FamilyJson::ExponentialProd { beta } => ParamFamily::ExponentialProd { rate: unfix(beta) },
            FamilyJson::GammaProd { shape, rate } => ParamFamily::GammaProd { shape: unfix(shape), rate: unfix(rate) },
            FamilyJson::GenericExpFam { log_partition, theta, sigma } => {
                if log_partition == LogPartition::Gaussian && sigma.is_none() {
                    return Err(Error::InvalidParameter("gaussian log-partition needs sigma".into()));
                }
                ParamFamily::GenericExpFam(GenericExpFam::named(log_partition, unfix(theta), sigma.map_or(1.0, |s| s.0)))
            }
        };
        f.validate()?;
        Ok(f)
    }
}

impl Serialize for ParamFamily {
    /// Families built from custom callbacks have no wire form and fail to serialize.
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let j = match self.clone() {
            ParamFamily::GaussianIso { mean, sigma } => FamilyJson::GaussianIso { mean: fix(&mean), sigma: Fixed(sigma) },
            ParamFamily::PoissonProd { lambda } => FamilyJson::PoissonProd { lambda: fix(&lambda) },
            ParamFamily::BernoulliProd { theta } => FamilyJson::BernoulliProd { theta: fix(&theta) },
            ParamFamily::ExponentialProd { rate } => FamilyJson::ExponentialProd { beta: fix(&rate) },
            ParamFamily::GammaProd { shape, rate } => FamilyJson::GammaProd { shape: fix(&shape), rate: fix(&rate) },
            ParamFamily::GenericExpFam(g) => {
                let (kind, sigma) = g.named.ok_or_else(|| {
                    serde::ser::Error::custom(format!("custom log-partition {:?} cannot be serialized", g.name))
                })?;
                FamilyJson::GenericExpFam {
                    log_partition: kind,
                    theta: fix(&g.theta),
                    sigma: (kind == LogPartition::Gaussian).then_some(Fixed(sigma)),
                }
            }
        };
        j.serialize(serializer)
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

fn check_all(name: &str, v: &[f64], ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(format!("{name} must be nonempty")));
    }
    match v.iter().position(|&x| !(x.is_finite() && ok(x))) {
        Some(i) => Err(invalid(format!("{name}[{i}] = {} must be {what}", v[i]))),
        None => Ok(()),
    }
}

impl ParamFamily {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ParamFamily::GaussianIso { .. } => "GaussianIso",
            ParamFamily::PoissonProd { .. } => "PoissonProd",
            ParamFamily::BernoulliProd { .. } => "BernoulliProd",
            ParamFamily::ExponentialProd { .. } => "ExponentialProd",
            ParamFamily::GammaProd { .. } => "GammaProd",
            ParamFamily::GenericExpFam(_) => "GenericExpFam",
        }
    }

    /// Number of independent coordinates (Gaussian: `d`).
    pub fn dimension(&self) -> usize {
        match self {
            ParamFamily::GaussianIso { mean, .. } => mean.len(),
            ParamFamily::PoissonProd { lambda } => lambda.len(),
            ParamFamily::BernoulliProd { theta } => theta.len(),
            ParamFamily::ExponentialProd { rate } => rate.len(),
            ParamFamily::GammaProd { shape, .. } => shape.len(),
            ParamFamily::GenericExpFam(g) => g.theta.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParamFamily::GaussianIso { mean, sigma } => {
                check_all("mean", mean, |_| true, "finite")?;
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(invalid(format!("sigma = {sigma} must be positive")));
                }
                Ok(())
            }
            ParamFamily::PoissonProd { lambda } => check_all("lambda", lambda, |x| x > 0.0, "positive"),
            ParamFamily::BernoulliProd { theta } => check_all("theta", theta, |x| x > 0.0 && x < 1.0, "in (0, 1)"),
            ParamFamily::ExponentialProd { rate } => check_all("beta", rate, |x| x > 0.0, "positive"),
            ParamFamily::GammaProd { shape, rate } => {
                check_all("shape", shape, |x| x > 0.0, "positive")?;
                check_all("rate", rate, |x| x > 0.0, "positive")?;
                if shape.len() != rate.len() {
                    return Err(Error::Dimension { expected: shape.len(), found: rate.len() });
                }
                Ok(())
            }
            ParamFamily::GenericExpFam(g) => {
                check_all("theta", &g.theta, |_| true, "finite")?;
                if !g.in_domain(&g.theta) {
                    return Err(invalid(format!("theta is outside the natural parameter domain of {}", g.name)));
                }
                Ok(())
            }
        }
    }

    /// The same distribution written through its natural parameter.
    pub fn to_generic(&self) -> GenericExpFam {
        match self {
            ParamFamily::GaussianIso { mean, sigma } => GenericExpFam::named(LogPartition::Gaussian, mean.clone(), *sigma),
            ParamFamily::PoissonProd { lambda } => {
                GenericExpFam::named(LogPartition::Poisson, lambda.iter().map(|l| l.ln()).collect(), 1.0)
            }
            ParamFamily::BernoulliProd { theta } => {
                GenericExpFam::named(LogPartition::Bernoulli, theta.iter().map(|t| (t / (1.0 - t)).ln()).collect(), 1.0)
            }
            ParamFamily::ExponentialProd { rate } => {
                GenericExpFam::named(LogPartition::Exponential, rate.iter().map(|b| -b).collect(), 1.0)
            }
            ParamFamily::GammaProd { shape, rate } => GenericExpFam::named(
                LogPartition::Gamma,
                shape.iter().zip(rate).flat_map(|(a, b)| [a - 1.0, -b]).collect(),
                1.0,
            ),
            ParamFamily::GenericExpFam(g) => g.clone(),
        }
    }

    /// The `ℓ`-th one-dimensional factor of a product family.
    pub fn component(&self, l: usize) -> Result<ParamFamily> {
        let d = self.dimension();
        if l >= d {
            return Err(Error::Dimension { expected: d, found: l });
        }
        Ok(match self {
            ParamFamily::GaussianIso { mean, sigma } => ParamFamily::GaussianIso { mean: vec![mean[l]], sigma: *sigma },
            ParamFamily::PoissonProd { lambda } => ParamFamily::PoissonProd { lambda: vec![lambda[l]] },
            ParamFamily::BernoulliProd { theta } => ParamFamily::BernoulliProd { theta: vec![theta[l]] },
            ParamFamily::ExponentialProd { rate } => ParamFamily::ExponentialProd { rate: vec![rate[l]] },
            ParamFamily::GammaProd { shape, rate } => ParamFamily::GammaProd { shape: vec![shape[l]], rate: vec![rate[l]] },
            ParamFamily::GenericExpFam(_) => {
                return Err(invalid("generic exponential families are not split into components".into()))
            }
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("alpha must be positive, got {alpha}")))
    }
}

pub(crate) fn check_triple(f0: &ParamFamily, f1: &ParamFamily, f2: &ParamFamily) -> Result<()> {
    for f in [f1, f2] {
        if std::mem::discriminant(f0) != std::mem::discriminant(f) {
            return Err(Error::KindMismatch(f0.kind_name(), f.kind_name()));
        }
    }
    for f in [f0, f1, f2] {
        f.validate()?;
    }
    for f in [f1, f2] {
        if f.dimension() != f0.dimension() {
            return Err(Error::Dimension { expected: f0.dimension(), found: f.dimension() });
        }
    }
    Ok(())
}

/// `exp(e) − 1`, saturating to `+∞` on overflow.
fn expm1_ext(e: f64) -> ExtReal {
    ExtReal::from_f64(e.exp_m1())
}

/// Log of `R + 1` for one Poisson coordinate: `λ0 u1 u2` with
/// `u_j = (λ_j/λ0)^α − 1`.
fn poisson_exponent(l0: f64, l1: f64, l2: f64, alpha: f64) -> f64 {
    let u1 = (alpha * (l1 / l0).ln()).exp_m1();
    let u2 = (alpha * (l2 / l0).ln()).exp_m1();
    l0 * u1 * u2
}

/// `R` for one Bernoulli coordinate, written as
/// `(θ0 u1 u2 + (1−θ0) v1 v2 − w1 w2) / ((1 + w1)(1 + w2))` with
/// `u_j = (θ_j/θ0)^α − 1`, `v_j = ((1−θ_j)/(1−θ0))^α − 1` and
/// `w_j = θ0 u_j + (1−θ0) v_j`, which avoids subtracting 1 from a ratio.
fn bernoulli_component(t0: f64, t1: f64, t2: f64, alpha: f64) -> f64 {
    let u = |t: f64| (alpha * (t / t0).ln()).exp_m1();
    let v = |t: f64| (alpha * ((1.0 - t) / (1.0 - t0)).ln()).exp_m1();
    let (u1, u2, v1, v2) = (u(t1), u(t2), v(t1), v(t2));
    let w1 = t0 * u1 + (1.0 - t0) * v1;
    let w2 = t0 * u2 + (1.0 - t0) * v2;
    (t0 * u1 * u2 + (1.0 - t0) * v1 * v2 - w1 * w2) / ((1.0 + w1) * (1.0 + w2))
}

/// Log of `R + 1` for one Gamma coordinate, `None` when a tilted shape or
/// rate is nonpositive (then `R = +∞`).
fn gamma_exponent(a: [f64; 3], b: [f64; 3], alpha: f64) -> Option<f64> {
    let a01 = a[0] + alpha * (a[1] - a[0]);
    let a02 = a[0] + alpha * (a[2] - a[0]);
    let abar = a[0] + alpha * (a[1] + a[2] - 2.0 * a[0]);
    let x1 = alpha * (b[1] - b[0]) / b[0];
    let x2 = alpha * (b[2] - b[0]) / b[0];
    // Tilted rates over β0 are 1 + x1, 1 + x2 and 1 + x1 + x2.
    if !(a01 > 0.0 && a02 > 0.0 && abar > 0.0 && 1.0 + x1 > 0.0 && 1.0 + x2 > 0.0 && 1.0 + x1 + x2 > 0.0) {
        return None;
    }
    let shapes = if a[1] == a[0] && a[2] == a[0] {
        0.0
    } else {
        ln_gamma(a[0]) + ln_gamma(abar) - ln_gamma(a01) - ln_gamma(a02)
    };
    Some(shapes + a01 * x1.ln_1p() + a02 * x2.ln_1p() - abar * (x1 + x2).ln_1p())
}

fn generic_exponent(g0: &GenericExpFam, g1: &GenericExpFam, g2: &GenericExpFam, alpha: f64) -> Option<f64> {
    let n = g0.theta.len();
    let mut t01 = Vec::with_capacity(n);
    let mut t02 = Vec::with_capacity(n);
    let mut tbar = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = (g0.theta[i], g1.theta[i], g2.theta[i]);
        t01.push(a + alpha * (b - a));
        t02.push(a + alpha * (c - a));
        tbar.push(a + alpha * (b + c - 2.0 * a));
    }
    if !(g0.in_domain(&t01) && g0.in_domain(&t02) && g0.in_domain(&tbar)) {
        return None;
    }
    let e = g0.log_partition(&tbar) - g0.log_partition(&t01) - g0.log_partition(&t02) + g0.log_partition(&g0.theta);
    e.is_finite().then_some(e)
}

/// Closed-form `R_α(P_{f0} | P_{f1}, P_{f2})`.
///
/// Domain violations (a tilted parameter leaving the natural parameter
/// space) give `+∞`, not an error.
pub fn r_alpha_closed(f0: &ParamFamily, f1: &ParamFamily, f2: &ParamFamily, alpha: f64) -> Result<ExtReal> {
    check_alpha(alpha)?;
    check_triple(f0, f1, f2)?;
    use ParamFamily as F;
    Ok(match (f0, f1, f2) {
        (F::GaussianIso { mean: m0, sigma: s0 }, F::GaussianIso { mean: m1, sigma: s1 }, F::GaussianIso { mean: m2, sigma: s2 }) => {
            if s0 != s1 || s0 != s2 {
                return Err(invalid("isotropic Gaussians must share sigma".into()));
            }
            let dot: f64 = m0.iter().zip(m1).zip(m2).map(|((a, b), c)| (b - a) * (c - a)).sum();
            expm1_ext(alpha * alpha * dot / (s0 * s0))
        }
        (F::PoissonProd { lambda: l0 }, F::PoissonProd { lambda: l1 }, F::PoissonProd { lambda: l2 }) => {
            expm1_ext((0..l0.len()).map(|i| poisson_exponent(l0[i], l1[i], l2[i], alpha)).sum())
        }
        (F::BernoulliProd { theta: t0 }, F::BernoulliProd { theta: t1 }, F::BernoulliProd { theta: t2 }) => {
            let parts: Vec<ExtReal> =
                (0..t0.len()).map(|i| ExtReal::Finite(bernoulli_component(t0[i], t1[i], t2[i], alpha))).collect();
            r_alpha_product(&parts)
        }
        (F::ExponentialProd { rate: b0 }, F::ExponentialProd { rate: b1 }, F::ExponentialProd { rate: b2 }) => {
            let mut e = 0.0;
            for i in 0..b0.len() {
                match gamma_exponent([1.0; 3], [b0[i], b1[i], b2[i]], alpha) {
                    Some(x) => e += x,
                    None => return Ok(ExtReal::PosInf),
                }
            }
            expm1_ext(e)
        }
        (F::GammaProd { shape: a0, rate: b0 }, F::GammaProd { shape: a1, rate: b1 }, F::GammaProd { shape: a2, rate: b2 }) => {
            let mut e = 0.0;
            for i in 0..a0.len() {
                match gamma_exponent([a0[i], a1[i], a2[i]], [b0[i], b1[i], b2[i]], alpha) {
                    Some(x) => e += x,
                    None => return Ok(ExtReal::PosInf),
                }
            }
            expm1_ext(e)
        }
        (F::GenericExpFam(g0), F::GenericExpFam(g1), F::GenericExpFam(g2)) => {
            if !g0.compatible(g1) || !g0.compatible(g2) {
                return Err(invalid("generic families must share the log-partition function".into()));
            }
            match generic_exponent(g0, g1, g2, alpha) {
                Some(e) => expm1_ext(e),
                None => ExtReal::PosInf,
            }
        }
        _ => unreachable!("kinds checked above"),
    })
}

/// `∏(R_ℓ + 1) − 1` for the coordinates of a product measure.
pub fn r_alpha_product(componentwise: &[ExtReal]) -> ExtReal {
    let mut log = 0.0;
    for c in componentwise {
        match c {
            ExtReal::PosInf => return ExtReal::PosInf,
            ExtReal::Finite(r) => log += r.ln_1p(),
        }
    }
    expm1_ext(log)
}

/// First-order approximation `exp(α² Σ_ℓ a_ℓ (β1ℓ−β0ℓ)(β2ℓ−β0ℓ)/β0ℓ²) − 1`
/// of `R_α` for Gamma products with shared shapes `a_ℓ`.
///
/// The sign is the one obtained by expanding the exact closed form to
/// second order in the rate increments; see the unit tests.
pub fn gamma_first_order(f0: &ParamFamily, f1: &ParamFamily, f2: &ParamFamily, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_triple(f0, f1, f2)?;
    match (f0, f1, f2) {
        (
            ParamFamily::GammaProd { shape: a0, rate: b0 },
            ParamFamily::GammaProd { shape: a1, rate: b1 },
            ParamFamily::GammaProd { shape: a2, rate: b2 },
        ) => {
            if a0 != a1 || a0 != a2 {
                return Err(invalid("gamma first-order approximation needs shared shapes".into()));
            }
            let s: f64 = (0..a0.len()).map(|i| a0[i] * (b1[i] - b0[i]) * (b2[i] - b0[i]) / (b0[i] * b0[i])).sum();
            Ok((alpha * alpha * s).exp_m1())
        }
        _ => Err(Error::KindMismatch("GammaProd", f0.kind_name())),
    }
}
