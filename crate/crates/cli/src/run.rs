//! Job execution and report documents.

use codivergence::closed_forms::r_alpha_closed;
use codivergence::codiv::{r_phi, v_phi, PhiFunction};
use codivergence::local_geometry::{
    expansion_check, hellinger_off_support_check, ExpansionGrid, ExpansionReport, OffSupportGrid, OffSupportReport,
};
use codivergence::matrices::{
    divergence_matrix, dpi_check, principal_rank_check, rank_with_identity, DivKind, DivMatrix, DpiReport,
    PrincipalRankReport, PsdStatus, RankReport, PSD_TOL, RANK_TOL,
};
use codivergence::measures::DiscreteMeasure;
use codivergence::oracle::{oracle_r_alpha, OracleConfig};
use codivergence::sampling::{dependent_measure, mixture, random_dominated, random_kernel, random_probability};
use codivergence::{Error, ExtReal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::job::{Command, Finding, Input, JobSpec, Quantity};
use crate::output::cell;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Validation = 2,
    Computation = 3,
    Violation = 4,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub findings: Option<Vec<Finding>>,
}

/// Top-level output: the report, or an error, or both for a property violation.
#[derive(Debug, Clone, Serialize)]
pub struct Document {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Document {
    pub fn validation(findings: Vec<Finding>) -> Self {
        let message = match findings.as_slice() {
            [one] => format!("{}: {}", one.path, one.message),
            many => format!("{} validation findings", many.len()),
        };
        Self::failure("validation", message, Some(findings))
    }

    pub fn failure(code: &str, message: String, findings: Option<Vec<Finding>>) -> Self {
        Document {
            command: None,
            seed: None,
            result: None,
            error: Some(ErrorBody { code: code.to_string(), message, findings }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Report {
    Codiv(CodivReport),
    Matrix(MatrixReport),
    Rank(RankJobReport),
    RankSuite(RankSuiteReport),
    Dpi(DpiJobReport),
    DpiSuite(DpiSuiteReport),
    Expand(ExpansionReport),
    OffSupport(OffSupportReport),
    OracleCheck(OracleCheckReport),
}

#[derive(Debug, Clone, Serialize)]
pub struct CodivReport {
    /// `"measures"` (exact finite sums) or `"closed_form"`.
    pub method: &'static str,
    pub phi: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub quantity: Quantity,
    pub value: ExtReal,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixReport {
    pub matrix: DivMatrix,
    pub psd: PsdStatus,
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankJobReport {
    pub kind: DivKind,
    pub tolerance: f64,
    pub rank: RankReport,
    /// Present when `M ≤ PRINCIPAL_MAX`.
    pub principal: Option<PrincipalRankReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KindSummary {
    pub kind: DivKind,
    pub instances: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankSuiteReport {
    pub trials: usize,
    pub tolerance: f64,
    pub kinds: Vec<KindSummary>,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DpiJobReport {
    pub tolerance: f64,
    #[serde(flatten)]
    pub report: DpiReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DpiSuiteReport {
    pub trials: usize,
    pub tolerance: f64,
    pub violations: usize,
    /// Smallest `λ_min / scale` over all instances.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheckReport {
    pub alpha: f64,
    pub closed: ExtReal,
    pub oracle: ExtReal,
    /// `|closed − oracle| / max(|closed|, |1 + closed|)`; 0 when both are `+∞`.
    pub relative_error: ExtReal,
    pub tolerance: f64,
    pub passed: bool,
}

/// Largest family size for the exhaustive principal-submatrix check.
pub const PRINCIPAL_MAX: usize = 12;

pub const ORACLE_CHECK_TOL: f64 = 1e-7;

/// Outcome of a successful or violating run.
pub struct Outcome {
    pub document: Document,
    pub exit: Exit,
}

/// Error `code` strings for library errors.
fn error_code(e: &Error) -> &'static str {
    match e {
        Error::OracleFailure(_) => "oracle_failure",
        Error::DegeneratePhi => "degenerate_phi",
        Error::InvalidPhi(_) => "invalid_phi",
        Error::NotDominated { .. } => "not_dominated",
        Error::SupportCondition(_) => "support_condition",
        Error::OutsideValidityRadius { .. } => "outside_validity_radius",
        Error::InfiniteEntries => "infinite_entries",
        _ => "computation",
    }
}

/// Converts an `alpha`-type φ name to its exponent.
pub fn phi_alpha(name: &str) -> Option<f64> {
    match name {
        "chi2" | "identity" => Some(1.0),
        "hellinger" | "sqrt" => Some(0.5),
        s => s.strip_prefix("alpha:").and_then(|v| v.parse().ok()),
    }
}

fn phi(job: &JobSpec, default: &str) -> Result<PhiFunction, Error> {
    PhiFunction::parse(job.options.phi.as_deref().unwrap_or(default))
}

fn split(inputs: &[Input]) -> (DiscreteMeasure, Vec<DiscreteMeasure>) {
    let p0 = inputs[0].probability();
    (p0, inputs[1..].iter().map(Input::probability).collect())
}

fn done(job: &JobSpec, result: Report, violated: Option<String>) -> Outcome {
    let error = violated.map(|message| ErrorBody { code: "property_violation".into(), message, findings: None });
    let exit = if error.is_some() { Exit::Violation } else { Exit::Success };
    Outcome {
        document: Document { command: Some(job.command), seed: job.options.seed, result: Some(result), error },
        exit,
    }
}

fn codiv(job: &JobSpec) -> Result<Outcome, Error> {
    let name = job.options.phi.clone().unwrap_or_else(|| "chi2".into());
    let report = match &job.inputs[0] {
        Input::Family(_) => {
            let alpha = phi_alpha(&name).ok_or_else(|| Error::InvalidPhi(name.clone()))?;
            let [f0, f1, f2] = [0, 1, 2].map(|i| job.inputs[i].family());
            CodivReport {
                method: "closed_form",
                phi: name,
                alpha: Some(alpha),
                quantity: Quantity::R,
                value: r_alpha_closed(f0, f1, f2, alpha)?,
            }
        }
        _ => {
            let phi = PhiFunction::parse(&name)?;
            let [p0, p1, p2] = [0, 1, 2].map(|i| job.inputs[i].probability());
            let value = match job.options.quantity {
                Quantity::R => r_phi(&p0, &p1, &p2, &phi)?,
                Quantity::V => v_phi(&p0, &p1, &p2, &phi)?,
            };
            CodivReport { method: "measures", phi: name, alpha: None, quantity: job.options.quantity, value }
        }
    };
    Ok(done(job, Report::Codiv(report), None))
}

fn matrix(job: &JobSpec) -> Result<Outcome, Error> {
    let kind = job.options.kind.expect("validated kind");
    let phi = if kind.needs_phi() { Some(phi(job, "chi2")?) } else { None };
    let (p0, ps) = split(&job.inputs);
    let m = divergence_matrix(&p0, &ps, kind, phi.as_ref())?;
    let report = MatrixReport { psd: m.psd_status(), eigenvalues: m.eigenvalues(), matrix: m };
    Ok(done(job, Report::Matrix(report), None))
}

fn rank(job: &JobSpec) -> Result<Outcome, Error> {
    let tol = job.options.tolerance.unwrap_or(RANK_TOL);
    if job.inputs.is_empty() {
        return rank_suite(job, tol);
    }
    let kind = job.options.kind.expect("validated kind");
    let phi = if kind.needs_phi() { Some(phi(job, "chi2")?) } else { None };
    let (p0, ps) = split(&job.inputs);
    let rank = rank_with_identity(&p0, &ps, kind, phi.as_ref(), tol)?;
    let principal = if ps.len() <= PRINCIPAL_MAX {
        Some(principal_rank_check(&divergence_matrix(&p0, &ps, kind, phi.as_ref())?, tol)?)
    } else {
        None
    };
    let mut violated = (!rank.agree)
        .then(|| format!("matrix rank {} differs from function rank {}", rank.matrix_rank, rank.function_rank));
    if let Some(p) = &principal {
        if !p.larger_all_singular || p.witness.len() != p.rank {
            violated.get_or_insert_with(|| "principal-submatrix characterisation of the rank fails".into());
        }
    }
    Ok(done(job, Report::Rank(RankJobReport { kind, tolerance: tol, rank, principal }), violated))
}

/// Random instances per kind; every fourth one is built to be rank deficient.
fn rank_suite(job: &JobSpec, tol: f64) -> Result<Outcome, Error> {
    let seed = job.options.seed.expect("validated seed");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = match job.options.kind {
        Some(k) => vec![k],
        None => vec![DivKind::Vphi, DivKind::Rphi, DivKind::Chi2, DivKind::Hellinger],
    };
    let fixed_phi = job.options.phi.as_deref().map(PhiFunction::parse).transpose()?;
    let mut summaries = Vec::new();
    let mut first_failure = None;
    for kind in kinds {
        let mut mismatches = 0;
        for i in 0..job.options.trials {
            let alpha = match (kind, &job.options.phi) {
                (DivKind::Chi2, _) => 1.0,
                (DivKind::Hellinger, _) => 0.5,
                (_, Some(name)) => phi_alpha(name).unwrap_or(1.0),
                _ => rng.random_range(0.2..2.5),
            };
            let phi = match (&fixed_phi, kind.needs_phi()) {
                (_, false) => None,
                (Some(p), true) => Some(p.clone()),
                (None, true) => Some(PhiFunction::power(alpha)?),
            };
            let n = rng.random_range(3..=10usize);
            let (p0, ps) = if i % 4 == 0 {
                let m = rng.random_range(2..=5usize.min(n));
                let base = random_probability(&mut rng, n);
                if kind == DivKind::Chi2 {
                    let ps = random_dominated(&mut rng, &base, m);
                    (mixture(&mut rng, &ps), ps)
                } else {
                    let mut ps = random_dominated(&mut rng, &base, m - 1);
                    let q = dependent_measure(&mut rng, &base, &ps, alpha);
                    ps.push(q);
                    (base, ps)
                }
            } else {
                let m = rng.random_range(1..=6usize);
                let base = random_probability(&mut rng, n);
                let ps = random_dominated(&mut rng, &base, m);
                (base, ps)
            };
            let rep = rank_with_identity(&p0, &ps, kind, phi.as_ref(), tol)?;
            if !rep.agree {
                mismatches += 1;
                first_failure.get_or_insert_with(|| {
                    format!("{} instance {i}: matrix rank {} vs function rank {}", kind.name(), rep.matrix_rank, rep.function_rank)
                });
            }
        }
        summaries.push(KindSummary { kind, instances: job.options.trials, mismatches });
    }
    let violated = first_failure.clone();
    let report = RankSuiteReport { trials: job.options.trials, tolerance: tol, kinds: summaries, first_failure };
    Ok(done(job, Report::RankSuite(report), violated))
}

fn dpi(job: &JobSpec) -> Result<Outcome, Error> {
    let tol = job.options.tolerance.unwrap_or(PSD_TOL);
    if job.inputs.is_empty() {
        return dpi_suite(job, tol);
    }
    let n = job.inputs.len();
    let (q0, qs) = split(&job.inputs[..n - 1]);
    let Input::Kernel(k) = &job.inputs[n - 1] else { unreachable!("validated layout") };
    let mut report = dpi_check(&q0, &qs, k)?;
    report.holds = report.min_eigenvalue >= -tol * report.scale;
    let violated = (!report.holds).then(|| {
        format!("before - after has eigenvalue {} below -{tol:e} x {}", report.min_eigenvalue, report.scale)
    });
    Ok(done(job, Report::Dpi(DpiJobReport { tolerance: tol, report }), violated))
}

fn dpi_suite(job: &JobSpec, tol: f64) -> Result<Outcome, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(job.options.seed.expect("validated seed"));
    let mut violations = 0;
    let mut worst_ratio = f64::INFINITY;
    for i in 0..job.options.trials {
        let n = rng.random_range(1..=8usize);
        let m = rng.random_range(1..=4usize);
        let cols = rng.random_range(1..=8usize);
        let q0 = random_probability(&mut rng, n);
        let qs = random_dominated(&mut rng, &q0, m);
        let k = random_kernel(&mut rng, n, cols, i % 2 == 1)?;
        let rep = dpi_check(&q0, &qs, &k)?;
        worst_ratio = worst_ratio.min(rep.min_eigenvalue / rep.scale);
        if rep.min_eigenvalue < -tol * rep.scale {
            violations += 1;
        }
    }
    let violated = (violations > 0).then(|| format!("{violations} of {} instances violate the inequality", job.options.trials));
    let report = DpiSuiteReport { trials: job.options.trials, tolerance: tol, violations, worst_ratio };
    Ok(done(job, Report::DpiSuite(report), violated))
}

fn expand(job: &JobSpec) -> Result<Outcome, Error> {
    let p0 = job.inputs[0].probability();
    let (mu, nu) = (job.inputs[1].signed(), job.inputs[2].signed());
    if job.options.off_support {
        let rep = hellinger_off_support_check(&p0, &mu, &nu, &OffSupportGrid::default())?;
        let violated = (!rep.passed).then(|| "fitted coefficients miss the expected ones".to_string());
        return Ok(done(job, Report::OffSupport(rep), violated));
    }
    let rep = expansion_check(&p0, &mu, &nu, &phi(job, "sqrt")?, &ExpansionGrid::default())?;
    let violated = (!rep.passed()).then(|| "residual ratios do not decay".to_string());
    Ok(done(job, Report::Expand(rep), violated))
}

fn relative_error(c: ExtReal, o: ExtReal) -> ExtReal {
    match (c, o) {
        (ExtReal::PosInf, ExtReal::PosInf) => ExtReal::ZERO,
        (ExtReal::Finite(c), ExtReal::Finite(o)) => ExtReal::Finite((c - o).abs() / c.abs().max((1.0 + c).abs())),
        _ => ExtReal::PosInf,
    }
}

fn oracle_check(job: &JobSpec) -> Result<Outcome, Error> {
    let name = job.options.phi.as_deref().expect("validated phi");
    let alpha = phi_alpha(name).ok_or_else(|| Error::InvalidPhi(name.to_string()))?;
    let tol = job.options.tolerance.unwrap_or(ORACLE_CHECK_TOL);
    let [f0, f1, f2] = [0, 1, 2].map(|i| job.inputs[i].family());
    let closed = r_alpha_closed(f0, f1, f2, alpha)?;
    let oracle = oracle_r_alpha(f0, f1, f2, alpha, &OracleConfig::default())?;
    let err = relative_error(closed, oracle);
    let passed = err.to_f64() <= tol;
    let violated = (!passed).then(|| format!("closed form {closed} and oracle {oracle} differ by {err}"));
    let report = OracleCheckReport { alpha, closed, oracle, relative_error: err, tolerance: tol, passed };
    Ok(done(job, Report::OracleCheck(report), violated))
}

/// Runs a validated job. Library errors become exit status 3.
pub fn run(job: &JobSpec) -> Outcome {
    let result = match job.command {
        Command::Codiv => codiv(job),
        Command::Matrix => matrix(job),
        Command::Rank => rank(job),
        Command::Dpi => dpi(job),
        Command::Expand => expand(job),
        Command::OracleCheck => oracle_check(job),
    };
    result.unwrap_or_else(|e| {
        let mut document = Document::failure(error_code(&e), e.to_string(), None);
        document.command = Some(job.command);
        document.seed = job.options.seed;
        Outcome { document, exit: Exit::Computation }
    })
}

impl Report {
    /// Header and rows for CSV output.
    pub fn csv(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        match self {
            Report::Codiv(r) => (vec!["quantity", "value"], vec![vec![format!("{:?}", r.quantity).to_lowercase(), cell(r.value.to_f64())]]),
            Report::Matrix(r) => (Vec::new(), r.matrix.csv_rows()),
            Report::Rank(r) => (
                vec!["matrix_rank", "function_rank", "agree"],
                vec![vec![r.rank.matrix_rank.to_string(), r.rank.function_rank.to_string(), r.rank.agree.to_string()]],
            ),
            Report::RankSuite(r) => (
                vec!["kind", "instances", "mismatches"],
                r.kinds.iter().map(|k| vec![k.kind.name().to_string(), k.instances.to_string(), k.mismatches.to_string()]).collect(),
            ),
            Report::Dpi(r) => {
                let m = r.report.before.size;
                (Vec::new(), r.report.difference.chunks(m.max(1)).map(|row| row.iter().map(|&x| cell(x)).collect()).collect())
            }
            Report::DpiSuite(r) => (
                vec!["trials", "violations", "worst_ratio"],
                vec![vec![r.trials.to_string(), r.violations.to_string(), cell(r.worst_ratio)]],
            ),
            Report::Expand(r) => (
                vec!["step", "vphi_residual_ratio", "rphi_residual_ratio"],
                (0..r.vphi.steps.len())
                    .map(|i| vec![cell(r.vphi.steps[i]), cell(r.vphi.residual_ratios[i]), cell(r.rphi.residual_ratios[i])])
                    .collect(),
            ),
            Report::OffSupport(r) => (
                vec!["coefficient", "expected", "fitted", "relative_error"],
                vec![
                    vec!["sqrt_ts".into(), cell(r.expected_sqrt_coefficient), cell(r.fitted_sqrt_coefficient), cell(r.sqrt_relative_error)],
                    vec!["ts".into(), cell(r.expected_ts_coefficient), cell(r.fitted_ts_coefficient), cell(r.ts_relative_error)],
                ],
            ),
            Report::OracleCheck(r) => (
                vec!["alpha", "closed", "oracle", "relative_error", "passed"],
                vec![vec![cell(r.alpha), cell(r.closed.to_f64()), cell(r.oracle.to_f64()), cell(r.relative_error.to_f64()), r.passed.to_string()]],
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn go(doc: serde_json::Value) -> Outcome {
        run(&JobSpec::from_value(&doc).expect("valid job"))
    }

    #[test]
    fn poisson_codiv_matches_closed_form() {
        let fam = |l: f64| json!({"kind": "PoissonProd", "params": {"lambda": [l]}});
        let out = go(json!({"command": "codiv", "inputs": [fam(1.0), fam(2.0), fam(3.0)]}));
        assert_eq!(out.exit, Exit::Success);
        let Some(Report::Codiv(r)) = out.document.result else { panic!() };
        assert!((r.value.to_f64() - 2.0f64.exp_m1()).abs() < 1e-12);
    }

    #[test]
    fn library_errors_are_computation_errors() {
        // A perturbation may not remove mass where P0 has none.
        let out = go(json!({"command": "expand", "options": {"off_support": true},
            "inputs": [{"mass": [1.0, 0.0]}, {"mass": [0.1, -0.1]}, {"mass": [-0.2, 0.2]}]}));
        assert_eq!(out.exit, Exit::Computation);
        assert_eq!(out.document.error.unwrap().code, "support_condition");
    }

    #[test]
    fn suites_are_reproducible() {
        let job = json!({"command": "dpi", "options": {"seed": 9, "trials": 30}});
        let a = crate::output::to_json(&go(job.clone()).document).unwrap();
        let b = crate::output::to_json(&go(job).document).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"seed\": 9"));
    }

    #[test]
    fn rank_suite_passes() {
        let out = go(json!({"command": "rank", "options": {"seed": 1, "trials": 20}}));
        assert_eq!(out.exit, Exit::Success);
    }

    #[test]
    fn failed_oracle_check_is_a_violation() {
        let fam = |l: f64| json!({"kind": "PoissonProd", "params": {"lambda": [l]}});
        let out = go(json!({"command": "oracle-check", "options": {"phi": "alpha:0.5", "tolerance": 1e-300},
            "inputs": [fam(1.0), fam(2.0), fam(3.0)]}));
        // Agreement to 1e-300 is out of reach unless the two agree bit for bit.
        let Some(Report::OracleCheck(r)) = &out.document.result else { panic!() };
        assert_eq!(out.exit == Exit::Violation, !r.passed);
    }
}
