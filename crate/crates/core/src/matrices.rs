//! Divergence matrices `D(P0 | P_j, P_k)` and their structural diagnostics.
//!
//! A divergence matrix behaves like the Gram matrix of the directions
//! `P_j − P0`: all four kinds are symmetric positive semi-definite when
//! finite, their rank is the dimension of a span of functions, and the χ²
//! matrix can only shrink under a Markov kernel.

use serde::{Deserialize, Serialize};

use crate::codiv::{chi2_codiv, hellinger_affinity, hellinger_codiv, r_phi, v_phi, PhiFunction};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::linalg::{max_nonsingular_principal, numerical_rank, symmetric_eigenvalues, Matrix};
pub use crate::linalg::RANK_TOL;
use crate::measures::{first_undominated, jordan_decompose, same_support, DiscreteMeasure, SignedMeasure};
use crate::summation::KahanSum;

/// Relative floor for the PSD test: `λ_min ≥ −PSD_TOL · max(λ_max, 1)`.
pub const PSD_TOL: f64 = 1e-9;

/// Tolerance on kernel row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivKind {
    Vphi,
    Rphi,
    Chi2,
    Hellinger,
}

impl DivKind {
    pub fn name(self) -> &'static str {
        match self {
            DivKind::Vphi => "vphi",
            DivKind::Rphi => "rphi",
            DivKind::Chi2 => "chi2",
            DivKind::Hellinger => "hellinger",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vphi" => Ok(DivKind::Vphi),
            "rphi" => Ok(DivKind::Rphi),
            "chi2" => Ok(DivKind::Chi2),
            "hellinger" => Ok(DivKind::Hellinger),
            other => Err(Error::InvalidParameter(format!("unknown matrix kind {other:?}"))),
        }
    }

    pub fn needs_phi(self) -> bool {
        matches!(self, DivKind::Vphi | DivKind::Rphi)
    }
}

/// An `M × M` matrix of codivergences, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DivMatrixJson")]
pub struct DivMatrix {
    pub kind: DivKind,
    pub size: usize,
    pub entries: Vec<ExtReal>,
    pub reference: String,
}

#[derive(Deserialize)]
struct DivMatrixJson {
    kind: DivKind,
    size: usize,
    entries: Vec<ExtReal>,
    reference: String,
}

impl TryFrom<DivMatrixJson> for DivMatrix {
    type Error = Error;

    fn try_from(j: DivMatrixJson) -> Result<Self> {
        same_support(j.size * j.size, j.entries.len())?;
        Ok(DivMatrix { kind: j.kind, size: j.size, entries: j.entries, reference: j.reference })
    }
}

/// Positive semi-definiteness verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PsdStatus {
    Psd { min_eigenvalue: f64, max_eigenvalue: f64 },
    Indefinite { min_eigenvalue: f64, max_eigenvalue: f64 },
    /// Some entry is `+∞`.
    NotApplicable,
}

impl PsdStatus {
    pub fn is_psd(&self) -> bool {
        matches!(self, PsdStatus::Psd { .. })
    }
}

impl DivMatrix {
    pub fn get(&self, j: usize, k: usize) -> ExtReal {
        self.entries[j * self.size + k]
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(ExtReal::is_finite)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|j| (0..j).all(|k| self.get(j, k) == self.get(k, j)))
    }

    /// The finite matrix, or `None` if some entry is `+∞`.
    pub fn to_matrix(&self) -> Option<Matrix> {
        let data: Option<Vec<f64>> = self.entries.iter().map(ExtReal::finite).collect();
        data.map(|d| Matrix::from_row_major(self.size, self.size, d))
    }

    /// Ascending eigenvalues, or `None` if some entry is `+∞`.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        self.to_matrix().map(|m| symmetric_eigenvalues(&m))
    }

    pub fn psd_status(&self) -> PsdStatus {
        match self.eigenvalues() {
            None => PsdStatus::NotApplicable,
            Some(ev) => {
                let min_eigenvalue = ev.first().copied().unwrap_or(0.0);
                let max_eigenvalue = ev.last().copied().unwrap_or(0.0);
                if min_eigenvalue >= -PSD_TOL * max_eigenvalue.max(1.0) {
                    PsdStatus::Psd { min_eigenvalue, max_eigenvalue }
                } else {
                    PsdStatus::Indefinite { min_eigenvalue, max_eigenvalue }
                }
            }
        }
    }

    /// Eigenvalues with `|λ| > tol · max(|λ|_max, 1)`; `None` with `+∞` entries.
    pub fn rank(&self, tol: f64) -> Option<usize> {
        self.eigenvalues().map(|ev| {
            let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let cut = tol * top.max(1.0);
            ev.iter().filter(|v| v.abs() > cut).count()
        })
    }

    /// Rows of cells for CSV output, `+∞` written as `inf`.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        (0..self.size)
            .map(|j| (0..self.size).map(|k| crate::extreal::format_f64(self.get(j, k).to_f64()).replace('"', "")).collect())
            .collect()
    }
}

fn check_family(p0: &DiscreteMeasure, ps: &[DiscreteMeasure]) -> Result<()> {
    p0.require_probability()?;
    for p in ps {
        same_support(p0.support_size(), p.support_size())?;
        p.require_probability()?;
    }
    Ok(())
}

fn require_phi(kind: DivKind, phi: Option<&PhiFunction>) -> Result<PhiFunction> {
    match (kind, phi) {
        (DivKind::Chi2, _) => Ok(PhiFunction::identity()),
        (DivKind::Hellinger, _) => Ok(PhiFunction::sqrt()),
        (_, Some(phi)) => Ok(phi.clone()),
        (_, None) => Err(Error::InvalidPhi(format!("matrix kind {} needs a phi function", kind.name()))),
    }
}

/// Entrywise divergence matrix `(D(P0 | P_j, P_k))_{j,k}`. Only the upper
/// triangle is evaluated, so the result is exactly symmetric.
pub fn divergence_matrix(
    p0: &DiscreteMeasure,
    ps: &[DiscreteMeasure],
    kind: DivKind,
    phi: Option<&PhiFunction>,
) -> Result<DivMatrix> {
    check_family(p0, ps)?;
    let phi = if kind.needs_phi() { Some(require_phi(kind, phi)?) } else { None };
    let m = ps.len();
    let mut entries = vec![ExtReal::ZERO; m * m];
    for j in 0..m {
        for k in j..m {
            let (a, b) = (&ps[j], &ps[k]);
            let value = match kind {
                DivKind::Vphi => v_phi(p0, a, b, phi.as_ref().expect("checked"))?,
                DivKind::Rphi => r_phi(p0, a, b, phi.as_ref().expect("checked"))?,
                DivKind::Chi2 => chi2_codiv(p0, a, b)?,
                DivKind::Hellinger => hellinger_codiv(p0, a, b)?,
            };
            entries[j * m + k] = value;
            entries[k * m + j] = value;
        }
    }
    Ok(DivMatrix { kind, size: m, entries, reference: "p0".to_string() })
}

/// `∫ φ(dP_j/dP0) dP0` over the support of `P0`, for each `j`.
pub fn phi_denominators(p0: &DiscreteMeasure, ps: &[DiscreteMeasure], phi: &PhiFunction) -> Result<Vec<f64>> {
    check_family(p0, ps)?;
    Ok(ps
        .iter()
        .map(|p| {
            let mut s = KahanSum::new();
            for (&q0, &q) in p0.mass().iter().zip(p.mass()) {
                if q0 > 0.0 {
                    s.add(q0 * phi.evaluate(q / q0));
                }
            }
            s.value()
        })
        .collect())
}

/// `R = D V D` with `D = diag(1/denominators)`.
pub fn link_identity_check(vmat: &DivMatrix, denominators: &[f64]) -> Result<DivMatrix> {
    if vmat.kind != DivKind::Vphi {
        return Err(Error::KindMismatch("vphi", vmat.kind.name()));
    }
    same_support(vmat.size, denominators.len())?;
    if denominators.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::DegeneratePhi);
    }
    let v = vmat.to_matrix().ok_or(Error::InfiniteEntries)?;
    let m = vmat.size;
    let mut entries = Vec::with_capacity(m * m);
    for j in 0..m {
        for k in 0..m {
            entries.push(ExtReal::Finite(v.get(j, k) / denominators[j] / denominators[k]));
        }
    }
    Ok(DivMatrix { kind: DivKind::Rphi, size: m, entries, reference: vmat.reference.clone() })
}

/// Exact covariance of `Φ(X) = (φ(dP_j/dP0)(X))_j` under `X ~ P0`, by
/// direct summation over the support.
pub fn phi_covariance(p0: &DiscreteMeasure, ps: &[DiscreteMeasure], phi: &PhiFunction) -> Result<Matrix> {
    check_family(p0, ps)?;
    for p in ps {
        if let Some(index) = first_undominated(p.mass(), p0.mass()) {
            return Err(Error::NotDominated { index });
        }
    }
    let support: Vec<usize> = (0..p0.support_size()).filter(|&x| p0.mass()[x] > 0.0).collect();
    let values: Vec<Vec<f64>> = ps
        .iter()
        .map(|p| support.iter().map(|&x| phi.evaluate(p.mass()[x] / p0.mass()[x])).collect())
        .collect();
    let weights: Vec<f64> = support.iter().map(|&x| p0.mass()[x]).collect();
    let means: Vec<f64> = values
        .iter()
        .map(|row| {
            let mut s = KahanSum::new();
            for (w, v) in weights.iter().zip(row) {
                s.add(w * v);
            }
            s.value()
        })
        .collect();
    let m = ps.len();
    let mut cov = Matrix::zeros(m, m);
    for j in 0..m {
        for k in j..m {
            let mut s = KahanSum::new();
            for (i, w) in weights.iter().enumerate() {
                s.add(w * (values[j][i] - means[j]) * (values[k][i] - means[k]));
            }
            cov.set(j, k, s.value());
            cov.set(k, j, s.value());
        }
    }
    Ok(cov)
}

/// `χ²(μ, P) = ∫ (dμ/dP − μ(Ω))² dP` for a signed `μ`; `+∞` unless `μ ≪ P`.
pub fn chi2_signed(mu: &SignedMeasure, p: &DiscreteMeasure) -> Result<ExtReal> {
    same_support(p.support_size(), mu.support_size())?;
    if first_undominated(mu.mass(), p.mass()).is_some() {
        return Ok(ExtReal::PosInf);
    }
    let total = mu.total();
    let mut s = KahanSum::new();
    for (&m, &q) in mu.mass().iter().zip(p.mass()) {
        if q > 0.0 {
            let d = m / q - total;
            s.add(q * d * d);
        }
    }
    Ok(ExtReal::Finite(s.value()))
}

/// Both sides of `χ²(μ,P) = α₊²χ²(μ₊,P) + α₋²χ²(μ₋,P) + 2α₊α₋`.
pub fn chi2_signed_decomposition_check(mu: &SignedMeasure, p: &DiscreteMeasure) -> Result<(ExtReal, ExtReal)> {
    same_support(p.support_size(), mu.support_size())?;
    if let Some(index) = first_undominated(mu.mass(), p.mass()) {
        return Err(Error::NotDominated { index });
    }
    let lhs = chi2_signed(mu, p)?;
    let jd = jordan_decompose(mu);
    let mut rhs = 2.0 * jd.alpha_plus * jd.alpha_minus;
    if jd.alpha_plus > 0.0 {
        rhs += jd.alpha_plus * jd.alpha_plus * chi2_signed(&jd.mu_plus.to_signed(), p)?.to_f64();
    }
    if jd.alpha_minus > 0.0 {
        rhs += jd.alpha_minus * jd.alpha_minus * chi2_signed(&jd.mu_minus.to_signed(), p)?.to_f64();
    }
    Ok((lhs, ExtReal::from_f64(rhs)))
}

/// `vᵀ D v` computed from the matrix (`lhs`) and from the integral
/// representation (`rhs`): `χ²(Σ v_j P_j, P0)` for χ², and
/// `∫ (Σ_j v_j (√p_j / α(P_j,P0) − √p0))² dν` for Hellinger.
pub fn quadratic_form_check(p0: &DiscreteMeasure, ps: &[DiscreteMeasure], kind: DivKind, v: &[f64]) -> Result<(f64, f64)> {
    same_support(ps.len(), v.len())?;
    let mat = divergence_matrix(p0, ps, kind, None)?;
    let a = mat.to_matrix().ok_or(Error::InfiniteEntries)?;
    let mut lhs = KahanSum::new();
    for j in 0..v.len() {
        for k in 0..v.len() {
            lhs.add(v[j] * a.get(j, k) * v[k]);
        }
    }
    let n = p0.support_size();
    let rhs = match kind {
        DivKind::Chi2 => {
            let mix = SignedMeasure::combination(n, v.iter().zip(ps).map(|(&c, p)| (c, p.mass())))?;
            chi2_signed(&mix, p0)?.finite().ok_or(Error::InfiniteEntries)?
        }
        DivKind::Hellinger => {
            let aff: Vec<f64> = ps.iter().map(|p| hellinger_affinity(p.mass(), p0.mass())).collect();
            let mut s = KahanSum::new();
            for x in 0..n {
                let root0 = p0.mass()[x].sqrt();
                let mut inner = 0.0;
                for (j, p) in ps.iter().enumerate() {
                    inner += v[j] * (p.mass()[x].sqrt() / aff[j] - root0);
                }
                s.add(inner * inner);
            }
            s.value()
        }
        other => return Err(Error::KindMismatch("chi2 or hellinger", other.name())),
    };
    Ok((lhs.value(), rhs))
}

/// A row-stochastic matrix `k(x, y)` acting on measures by `μ ↦ μK`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelJson", into = "KernelJson")]
pub struct MarkovKernel {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelJson {
    rows: usize,
    cols: usize,
    matrix: Vec<Vec<crate::extreal::Fixed>>,
}

impl TryFrom<KernelJson> for MarkovKernel {
    type Error = Error;

    fn try_from(j: KernelJson) -> Result<Self> {
        same_support(j.rows, j.matrix.len())?;
        let rows: Vec<Vec<f64>> = j.matrix.into_iter().map(|r| r.into_iter().map(|f| f.0).collect()).collect();
        for r in &rows {
            same_support(j.cols, r.len())?;
        }
        MarkovKernel::new(rows)
    }
}

impl From<MarkovKernel> for KernelJson {
    fn from(k: MarkovKernel) -> Self {
        KernelJson {
            rows: k.rows,
            cols: k.cols,
            matrix: k.matrix.chunks(k.cols).map(|r| r.iter().copied().map(crate::extreal::Fixed).collect()).collect(),
        }
    }
}

impl MarkovKernel {
    /// Validates nonnegativity and unit row sums (within [`ROW_SUM_TOL`]).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::EmptySupport);
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(Error::EmptySupport);
        }
        let mut matrix = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            same_support(c, row.len())?;
            if let Some((j, &value)) = row.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidMass { index: i * c + j, value });
            }
            let sum = crate::summation::kahan_sum(row.iter().copied());
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotRowStochastic { row: i, sum });
            }
            matrix.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, matrix })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }

    /// Every row equal to `w`: the output forgets the input.
    pub fn constant(n: usize, w: &DiscreteMeasure) -> Result<Self> {
        Self::new(vec![w.mass().to_vec(); n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.matrix[x * self.cols + y]
    }

    fn apply(&self, mass: &[f64]) -> Result<Vec<f64>> {
        same_support(self.rows, mass.len())?;
        Ok((0..self.cols)
            .map(|y| {
                let mut s = KahanSum::new();
                for (x, &m) in mass.iter().enumerate() {
                    s.add(m * self.entry(x, y));
                }
                s.value()
            })
            .collect())
    }

    pub fn push_forward(&self, p: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.apply(p.mass())?)
    }

    pub fn push_forward_signed(&self, mu: &SignedMeasure) -> Result<SignedMeasure> {
        SignedMeasure::new(self.apply(mu.mass())?)
    }
}

/// Outcome of the data-processing comparison of χ² matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpiReport {
    pub before: DivMatrix,
    pub after: DivMatrix,
    /// Row-major `before − after`.
    pub difference: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `max(λ_max(before), 1)`.
    pub scale: f64,
    pub holds: bool,
}

/// Compares `χ²(Q0 | Q_1..Q_M)` with `χ²(KQ0 | KQ_1..KQ_M)` in the PSD order.
pub fn dpi_check(q0: &DiscreteMeasure, qs: &[DiscreteMeasure], k: &MarkovKernel) -> Result<DpiReport> {
    check_family(q0, qs)?;
    for q in qs {
        if let Some(index) = first_undominated(q.mass(), q0.mass()) {
            return Err(Error::NotDominated { index });
        }
    }
    let before = divergence_matrix(q0, qs, DivKind::Chi2, None)?;
    let kq0 = k.push_forward(q0)?;
    let kqs = qs.iter().map(|q| k.push_forward(q)).collect::<Result<Vec<_>>>()?;
    let after = divergence_matrix(&kq0, &kqs, DivKind::Chi2, None)?;
    let b = before.to_matrix().ok_or(Error::InfiniteEntries)?;
    let a = after.to_matrix().ok_or(Error::InfiniteEntries)?;
    let m = qs.len();
    let difference: Vec<f64> = b.data().iter().zip(a.data()).map(|(x, y)| x - y).collect();
    let ev = symmetric_eigenvalues(&Matrix::from_row_major(m, m, difference.clone()));
    let min_eigenvalue = ev.first().copied().unwrap_or(0.0);
    let scale = symmetric_eigenvalues(&b).last().copied().unwrap_or(0.0).max(1.0);
    Ok(DpiReport { before, after, difference, min_eigenvalue, scale, holds: min_eigenvalue >= -PSD_TOL * scale })
}

/// Matrix rank against the dimension of the span of the underlying functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub matrix_rank: usize,
    pub function_rank: usize,
    pub agree: bool,
}

/// The `(M+1) × N` matrix whose row span is the function span: rows `1` and
/// `φ(dP_j/dP0)` weighted by `√p0` on `supp(P0)`, or rows `√p_j` for
/// Hellinger.
pub fn function_rows(p0: &DiscreteMeasure, ps: &[DiscreteMeasure], kind: DivKind, phi: Option<&PhiFunction>) -> Result<Matrix> {
    check_family(p0, ps)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(ps.len() + 1);
    if kind == DivKind::Hellinger {
        for p in ps {
            if hellinger_affinity(p.mass(), p0.mass()) == 0.0 {
                return Err(Error::SupportCondition("a measure has zero affinity with the reference".into()));
            }
        }
        rows.push(p0.mass().iter().map(|m| m.sqrt()).collect());
        rows.extend(ps.iter().map(|p| p.mass().iter().map(|m| m.sqrt()).collect()));
    } else {
        let phi = require_phi(kind, phi)?;
        for p in ps {
            if let Some(index) = first_undominated(p.mass(), p0.mass()) {
                return Err(Error::NotDominated { index });
            }
        }
        let support: Vec<usize> = (0..p0.support_size()).filter(|&x| p0.mass()[x] > 0.0).collect();
        rows.push(support.iter().map(|&x| p0.mass()[x].sqrt()).collect());
        for p in ps {
            rows.push(
                support
                    .iter()
                    .map(|&x| {
                        let q0 = p0.mass()[x];
                        q0.sqrt() * phi.evaluate(p.mass()[x] / q0)
                    })
                    .collect(),
            );
        }
    }
    Ok(Matrix::from_rows(&rows))
}

/// Rank of the divergence matrix and `Rank(1, φ∘r_1, …) − 1` (or
/// `Rank(√p0, …, √p_M) − 1` for Hellinger), both thresholded at `tol`.
pub fn rank_with_identity(
    p0: &DiscreteMeasure,
    ps: &[DiscreteMeasure],
    kind: DivKind,
    phi: Option<&PhiFunction>,
    tol: f64,
) -> Result<RankReport> {
    let rows = function_rows(p0, ps, kind, phi)?;
    let function_rank = numerical_rank(&rows, tol).saturating_sub(1);
    let mat = divergence_matrix(p0, ps, kind, phi)?;
    let matrix_rank = mat.rank(tol).ok_or(Error::InfiniteEntries)?;
    Ok(RankReport { matrix_rank, function_rank, agree: matrix_rank == function_rank })
}

/// Principal-submatrix characterisation of the rank of a PSD matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalRankReport {
    pub rank: usize,
    /// Index set of a nonsingular `rank × rank` principal submatrix.
    pub witness: Vec<usize>,
    /// Whether every `(rank+1) × (rank+1)` principal submatrix is singular.
    pub larger_all_singular: bool,
}

/// Enumerates principal submatrices (exponential in `M`; meant for `M ≤ 12`).
pub fn principal_rank_check(mat: &DivMatrix, tol: f64) -> Result<PrincipalRankReport> {
    let a = mat.to_matrix().ok_or(Error::InfiniteEntries)?;
    let rank = mat.rank(tol).ok_or(Error::InfiniteEntries)?;
    let (k, witness) = max_nonsingular_principal(&a, tol);
    // `k` is the largest nonsingular principal size: the characterisation
    // holds iff it equals the rank.
    Ok(PrincipalRankReport { rank, witness: if k == rank { witness } else { Vec::new() }, larger_all_singular: k <= rank })
}
