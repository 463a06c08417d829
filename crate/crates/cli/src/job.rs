//! Job specifications and their validation.
//!
//! A job is a JSON document
//!
//! ```json
//! {"command": "matrix", "inputs": [{"mass": [0.5, 0.5]}, ...], "options": {"kind": "chi2"}}
//! ```
//!
//! Inputs are measures (`{"mass": [...]}`, optional `"support"`), parametric
//! families (`{"kind": "PoissonProd", "params": {...}}`) or Markov kernels
//! (`{"matrix": [[...], ...]}`). [`validate`] inspects the raw document and
//! reports every violated precondition with a JSON pointer, so that nothing
//! is computed from a malformed job.

use codivergence::closed_forms::ParamFamily;
use codivergence::matrices::{DivKind, MarkovKernel, ROW_SUM_TOL};
use codivergence::measures::{DiscreteMeasure, SignedMeasure, PROBABILITY_TOL, ZERO_MASS_TOL};
use codivergence::PhiFunction;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Codiv,
    Matrix,
    Rank,
    Dpi,
    Expand,
    OracleCheck,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Codiv, Command::Matrix, Command::Rank, Command::Dpi, Command::Expand, Command::OracleCheck];

    pub fn name(self) -> &'static str {
        match self {
            Command::Codiv => "codiv",
            Command::Matrix => "matrix",
            Command::Rank => "rank",
            Command::Dpi => "dpi",
            Command::Expand => "expand",
            Command::OracleCheck => "oracle-check",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    R,
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Measure(Vec<f64>),
    Family(ParamFamily),
    Kernel(MarkovKernel),
}

#[derive(Debug, Clone)]
pub struct Options {
    pub kind: Option<DivKind>,
    pub phi: Option<String>,
    pub quantity: Quantity,
    pub tolerance: Option<f64>,
    pub format: Format,
    pub seed: Option<u64>,
    pub trials: usize,
    pub off_support: bool,
}

pub const DEFAULT_TRIALS: usize = 100;
const MAX_TRIALS: u64 = 1_000_000;

const OPTION_KEYS: [&str; 8] = ["kind", "phi", "quantity", "tolerance", "format", "seed", "trials", "off_support"];

/// A validated job.
#[derive(Debug, Clone)]
pub struct JobSpec {
    pub command: Command,
    pub inputs: Vec<Input>,
    pub options: Options,
}

/// One violated precondition, located by a JSON pointer into the job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub path: String,
    pub message: String,
}

struct Findings(Vec<Finding>);

impl Findings {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Finding { path: path.into(), message: message.into() });
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Probability,
    Signed,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Class {
    Measure,
    Family,
    Kernel,
}

fn classify(v: &Value) -> Option<Class> {
    let o = v.as_object()?;
    if o.contains_key("mass") {
        Some(Class::Measure)
    } else if o.contains_key("matrix") {
        Some(Class::Kernel)
    } else if o.contains_key("kind") {
        Some(Class::Family)
    } else {
        None
    }
}

fn inputs_of(doc: &Value) -> &[Value] {
    doc.get("inputs").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[])
}

fn number_array(v: &Value, path: &str, f: &mut Findings) -> Option<Vec<f64>> {
    let Some(items) = v.as_array() else {
        f.push(path, "expected an array of numbers");
        return None;
    };
    let mut out = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, x) in items.iter().enumerate() {
        match x.as_f64() {
            Some(x) => out.push(x),
            None => {
                f.push(format!("{path}/{i}"), "expected a number");
                ok = false;
            }
        }
    }
    ok.then_some(out)
}

fn check_measure(v: &Value, path: &str, role: Role, f: &mut Findings) -> Option<Vec<f64>> {
    let mass_path = format!("{path}/mass");
    let mass = number_array(&v["mass"], &mass_path, f)?;
    let before = f.0.len();
    if mass.is_empty() {
        f.push(&mass_path, "support must be nonempty");
    }
    if let Some(s) = v.get("support") {
        if s.as_u64() != Some(mass.len() as u64) {
            f.push(format!("{path}/support"), format!("support must equal the number of masses ({})", mass.len()));
        }
    }
    for (i, &m) in mass.iter().enumerate() {
        if role == Role::Probability && m < 0.0 {
            f.push(format!("{mass_path}/{i}"), format!("negative mass {m}"));
        }
    }
    let total: f64 = mass.iter().sum();
    match role {
        Role::Probability if (total - 1.0).abs() > PROBABILITY_TOL && f.0.len() == before => {
            f.push(&mass_path, format!("total mass {total} is not 1"));
        }
        Role::Signed if total.abs() > ZERO_MASS_TOL => {
            f.push(&mass_path, format!("total mass {total} of a perturbation must be 0"));
        }
        _ => {}
    }
    (f.0.len() == before).then_some(mass)
}

fn check_params(kind: &str, params: &Map<String, Value>, path: &str, f: &mut Findings) {
    let mut field = |name: &str, ok: &dyn Fn(f64) -> bool, what: &str| -> Option<usize> {
        let p = format!("{path}/params/{name}");
        let Some(v) = params.get(name) else {
            f.push(&p, "missing parameter");
            return None;
        };
        let xs = number_array(v, &p, f)?;
        if xs.is_empty() {
            f.push(&p, "must be nonempty");
        }
        for (i, &x) in xs.iter().enumerate() {
            if !ok(x) {
                f.push(format!("{p}/{i}"), format!("{name} = {x} {what}"));
            }
        }
        Some(xs.len())
    };
    let positive = |x: f64| x > 0.0;
    match kind {
        "GaussianIso" => {
            field("mean", &|_| true, "must be finite");
            match params.get("sigma").and_then(Value::as_f64) {
                Some(s) if s > 0.0 => {}
                _ => f.push(format!("{path}/params/sigma"), "sigma must be a positive number"),
            }
        }
        "PoissonProd" => {
            field("lambda", &positive, "must be positive");
        }
        "BernoulliProd" => {
            field("theta", &|x| x > 0.0 && x < 1.0, "violates the open interval (0, 1)");
        }
        "ExponentialProd" => {
            let name = if params.contains_key("rate") { "rate" } else { "beta" };
            field(name, &positive, "must be positive");
        }
        "GammaProd" => {
            let a = field("shape", &positive, "must be positive");
            let b = field("rate", &positive, "must be positive");
            if let (Some(a), Some(b)) = (a, b) {
                if a != b {
                    f.push(format!("{path}/params/rate"), format!("expected {a} rates to match the shapes"));
                }
            }
        }
        _ => {}
    }
}

fn check_family(v: &Value, path: &str, f: &mut Findings) -> Option<ParamFamily> {
    let before = f.0.len();
    let kind = v["kind"].as_str().unwrap_or("");
    const KINDS: [&str; 6] = ["GaussianIso", "PoissonProd", "BernoulliProd", "ExponentialProd", "GammaProd", "GenericExpFam"];
    if !KINDS.contains(&kind) {
        f.push(format!("{path}/kind"), format!("unknown family kind {:?}; expected one of {}", v["kind"], KINDS.join(", ")));
        return None;
    }
    let Some(params) = v.get("params").and_then(Value::as_object) else {
        f.push(format!("{path}/params"), "expected a parameter object");
        return None;
    };
    check_params(kind, params, path, f);
    if f.0.len() > before {
        return None;
    }
    match serde_json::from_value::<ParamFamily>(v.clone()) {
        Ok(fam) => Some(fam),
        Err(e) => {
            f.push(path, e.to_string());
            None
        }
    }
}

fn check_kernel(v: &Value, path: &str, f: &mut Findings) -> Option<MarkovKernel> {
    let before = f.0.len();
    let mpath = format!("{path}/matrix");
    let Some(rows) = v["matrix"].as_array() else {
        f.push(&mpath, "expected an array of rows");
        return None;
    };
    if rows.is_empty() {
        f.push(&mpath, "kernel needs at least one row");
        return None;
    }
    let mut parsed = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let rpath = format!("{mpath}/{r}");
        let Some(xs) = number_array(row, &rpath, f) else { continue };
        for (c, &x) in xs.iter().enumerate() {
            if x < 0.0 {
                f.push(format!("{rpath}/{c}"), format!("negative transition probability {x}"));
            }
        }
        let sum: f64 = xs.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            f.push(&rpath, format!("row sums to {sum}; kernel is not row-stochastic"));
        }
        parsed.push(xs);
    }
    let cols = parsed.first().map_or(0, Vec::len);
    if cols == 0 {
        f.push(format!("{mpath}/0"), "rows must be nonempty");
    }
    for (r, row) in parsed.iter().enumerate() {
        if row.len() != cols {
            f.push(format!("{mpath}/{r}"), format!("expected {cols} columns, found {}", row.len()));
        }
    }
    for (key, want) in [("rows", rows.len()), ("cols", cols)] {
        if let Some(x) = v.get(key) {
            if x.as_u64() != Some(want as u64) {
                f.push(format!("{path}/{key}"), format!("{key} must equal {want}"));
            }
        }
    }
    if f.0.len() > before {
        return None;
    }
    match MarkovKernel::new(parsed) {
        Ok(k) => Some(k),
        Err(e) => {
            f.push(path, e.to_string());
            None
        }
    }
}

fn parse_options(doc: &Value, f: &mut Findings) -> Options {
    let mut o = Options {
        kind: None,
        phi: None,
        quantity: Quantity::R,
        tolerance: None,
        format: Format::Json,
        seed: None,
        trials: DEFAULT_TRIALS,
        off_support: false,
    };
    let Some(opts) = doc.get("options") else { return o };
    let Some(opts) = opts.as_object() else {
        f.push("/options", "expected an object");
        return o;
    };
    for key in opts.keys() {
        if !OPTION_KEYS.contains(&key.as_str()) {
            f.push(format!("/options/{key}"), format!("unknown option; expected one of {}", OPTION_KEYS.join(", ")));
        }
    }
    if let Some(v) = opts.get("kind") {
        match v.as_str().map(DivKind::parse) {
            Some(Ok(k)) => o.kind = Some(k),
            _ => f.push("/options/kind", "kind must be one of vphi, rphi, chi2, hellinger"),
        }
    }
    if let Some(v) = opts.get("phi") {
        match v.as_str() {
            Some(s) => match PhiFunction::parse(s) {
                Ok(_) => o.phi = Some(s.to_string()),
                Err(e) => f.push("/options/phi", e.to_string()),
            },
            None => f.push("/options/phi", "phi must be a string such as \"chi2\", \"hellinger\" or \"alpha:0.5\""),
        }
    }
    if let Some(v) = opts.get("quantity") {
        match v.as_str() {
            Some("r") => o.quantity = Quantity::R,
            Some("v") => o.quantity = Quantity::V,
            _ => f.push("/options/quantity", "quantity must be \"r\" or \"v\""),
        }
    }
    if let Some(v) = opts.get("tolerance") {
        match v.as_f64() {
            Some(t) if t > 0.0 && t.is_finite() => o.tolerance = Some(t),
            _ => f.push("/options/tolerance", "tolerance must be a positive number"),
        }
    }
    if let Some(v) = opts.get("format") {
        match v.as_str() {
            Some("json") => o.format = Format::Json,
            Some("csv") => o.format = Format::Csv,
            _ => f.push("/options/format", "format must be \"json\" or \"csv\""),
        }
    }
    if let Some(v) = opts.get("seed") {
        match v.as_u64() {
            Some(s) => o.seed = Some(s),
            None => f.push("/options/seed", "seed must be an unsigned 64-bit integer"),
        }
    }
    if let Some(v) = opts.get("trials") {
        match v.as_u64() {
            Some(t) if (1..=MAX_TRIALS).contains(&t) => o.trials = t as usize,
            _ => f.push("/options/trials", format!("trials must be an integer in [1, {MAX_TRIALS}]")),
        }
    }
    if let Some(v) = opts.get("off_support") {
        match v.as_bool() {
            Some(b) => o.off_support = b,
            None => f.push("/options/off_support", "off_support must be a boolean"),
        }
    }
    o
}

/// Checks that every input in `range` has the expected class.
fn expect_classes(inputs: &[Value], want: Class, range: std::ops::Range<usize>, f: &mut Findings) -> bool {
    let mut ok = true;
    for i in range {
        let got = classify(&inputs[i]);
        if got != Some(want) {
            let name = match want {
                Class::Measure => "a measure {\"mass\": [...]}",
                Class::Family => "a family {\"kind\": ..., \"params\": {...}}",
                Class::Kernel => "a kernel {\"matrix\": [[...]]}",
            };
            f.push(format!("/inputs/{i}"), format!("expected {name}"));
            ok = false;
        }
    }
    ok
}

fn count(inputs: &[Value], ok: bool, want: &str, f: &mut Findings) -> bool {
    if !ok {
        f.push("/inputs", format!("expected {want}, found {} inputs", inputs.len()));
    }
    ok
}

fn measures(inputs: &[Value], roles: &[Role], f: &mut Findings) -> Vec<Input> {
    let mut out = Vec::new();
    let mut support = None;
    for (i, (v, role)) in inputs.iter().zip(roles).enumerate() {
        if let Some(m) = check_measure(v, &format!("/inputs/{i}"), *role, f) {
            match support {
                None => support = Some(m.len()),
                Some(n) if n != m.len() => {
                    f.push(format!("/inputs/{i}/mass"), format!("support size {} differs from the reference's {n}", m.len()));
                }
                _ => {}
            }
            out.push(Input::Measure(m));
        }
    }
    out
}

fn families(inputs: &[Value], f: &mut Findings) -> Vec<Input> {
    let fams: Vec<Option<ParamFamily>> =
        inputs.iter().enumerate().map(|(i, v)| check_family(v, &format!("/inputs/{i}"), f)).collect();
    if let Some(Some(f0)) = fams.first() {
        for (i, fam) in fams.iter().enumerate().skip(1) {
            let Some(fam) = fam else { continue };
            if fam.kind_name() != f0.kind_name() {
                f.push(format!("/inputs/{i}/kind"), format!("family {} differs from the reference's {}", fam.kind_name(), f0.kind_name()));
            } else if fam.dimension() != f0.dimension() {
                f.push(format!("/inputs/{i}/params"), format!("dimension {} differs from the reference's {}", fam.dimension(), f0.dimension()));
            } else if let (ParamFamily::GaussianIso { sigma: a, .. }, ParamFamily::GaussianIso { sigma: b, .. }) = (f0, fam) {
                if a != b {
                    f.push(format!("/inputs/{i}/params/sigma"), "all Gaussian members must share sigma");
                }
            }
        }
    }
    fams.into_iter().flatten().map(Input::Family).collect()
}

fn require_kind(o: &Options, f: &mut Findings) {
    match o.kind {
        None => f.push("/options/kind", "this command needs a matrix kind"),
        Some(k) if k.needs_phi() && o.phi.is_none() => {
            f.push("/options/phi", format!("kind {} needs a phi function", k.name()))
        }
        _ => {}
    }
}

fn check_layout(cmd: Command, inputs: &[Value], o: &Options, f: &mut Findings) -> Vec<Input> {
    let n = inputs.len();
    use Role::{Probability as P, Signed as S};
    match cmd {
        Command::Codiv => {
            if !count(inputs, n == 3, "3 inputs (reference and two measures or families)", f) {
                return Vec::new();
            }
            match classify(&inputs[0]) {
                Some(Class::Family) => {
                    expect_classes(inputs, Class::Family, 0..3, f);
                    if o.quantity == Quantity::V {
                        f.push("/options/quantity", "closed forms are available for the correlation form \"r\" only");
                    }
                    families(inputs, f)
                }
                _ => {
                    if !expect_classes(inputs, Class::Measure, 0..3, f) {
                        return Vec::new();
                    }
                    measures(inputs, &[P, P, P], f)
                }
            }
        }
        Command::Matrix => {
            require_kind(o, f);
            if !count(inputs, n >= 2, "a reference measure followed by at least one measure", f)
                || !expect_classes(inputs, Class::Measure, 0..n, f)
            {
                return Vec::new();
            }
            measures(inputs, &vec![P; n], f)
        }
        Command::Rank => {
            if n == 0 {
                if o.seed.is_none() {
                    f.push("/options/seed", "the randomized rank suite needs an explicit seed");
                }
                return Vec::new();
            }
            require_kind(o, f);
            if !count(inputs, n >= 2, "no inputs (randomized suite) or a reference and at least one measure", f)
                || !expect_classes(inputs, Class::Measure, 0..n, f)
            {
                return Vec::new();
            }
            measures(inputs, &vec![P; n], f)
        }
        Command::Dpi => {
            if n == 0 {
                if o.seed.is_none() {
                    f.push("/options/seed", "the randomized DPI suite needs an explicit seed");
                }
                return Vec::new();
            }
            if !count(inputs, n >= 3, "a reference, at least one measure and a kernel", f) {
                return Vec::new();
            }
            let ok = expect_classes(inputs, Class::Measure, 0..n - 1, f) & expect_classes(inputs, Class::Kernel, n - 1..n, f);
            if !ok {
                return Vec::new();
            }
            let mut out = measures(&inputs[..n - 1], &vec![P; n - 1], f);
            if let Some(k) = check_kernel(&inputs[n - 1], &format!("/inputs/{}", n - 1), f) {
                if let Some(Input::Measure(m)) = out.first() {
                    if k.rows() != m.len() {
                        f.push(format!("/inputs/{}/matrix", n - 1), format!("kernel has {} rows but the measures have {} atoms", k.rows(), m.len()));
                    }
                }
                out.push(Input::Kernel(k));
            }
            out
        }
        Command::Expand => {
            if !count(inputs, n == 3, "3 inputs (reference and two perturbations)", f)
                || !expect_classes(inputs, Class::Measure, 0..3, f)
            {
                return Vec::new();
            }
            measures(inputs, &[P, S, S], f)
        }
        Command::OracleCheck => {
            if o.phi.is_none() {
                f.push("/options/phi", "oracle-check needs an exponent, e.g. \"alpha:0.5\"");
            }
            if !count(inputs, n == 3, "3 families", f) || !expect_classes(inputs, Class::Family, 0..3, f) {
                return Vec::new();
            }
            for (i, v) in inputs.iter().enumerate() {
                if v["kind"] == "GenericExpFam" {
                    f.push(format!("/inputs/{i}/kind"), "the oracle integrates named families only");
                }
            }
            families(inputs, f)
        }
    }
}

fn check(doc: &Value) -> (Option<JobSpec>, Vec<Finding>) {
    let mut f = Findings(Vec::new());
    let Some(root) = doc.as_object() else {
        f.push("", "job must be a JSON object");
        return (None, f.0);
    };
    for key in root.keys() {
        if !["command", "inputs", "options"].contains(&key.as_str()) {
            f.push(format!("/{key}"), "unknown field; expected command, inputs, options");
        }
    }
    let command = match root.get("command").and_then(Value::as_str) {
        Some(s) => match Command::parse(s) {
            Some(c) => Some(c),
            None => {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                f.push("/command", format!("unknown command {s:?}; expected one of {}", names.join(", ")));
                None
            }
        },
        None => {
            f.push("/command", "missing command");
            None
        }
    };
    if let Some(v) = root.get("inputs") {
        if !v.is_array() {
            f.push("/inputs", "expected an array");
        }
    }
    let options = parse_options(doc, &mut f);
    let Some(command) = command else { return (None, f.0) };
    let inputs = check_layout(command, inputs_of(doc), &options, &mut f);
    if f.0.is_empty() {
        (Some(JobSpec { command, inputs, options }), f.0)
    } else {
        (None, f.0)
    }
}

/// Every violated precondition of `run`; empty iff the job can run.
pub fn validate(doc: &Value) -> Vec<Finding> {
    check(doc).1
}

impl JobSpec {
    /// Validates and converts a raw job document.
    pub fn from_value(doc: &Value) -> Result<JobSpec, Vec<Finding>> {
        match check(doc) {
            (Some(job), _) => Ok(job),
            (None, findings) => Err(findings),
        }
    }
}

impl Input {
    pub(crate) fn probability(&self) -> DiscreteMeasure {
        match self {
            Input::Measure(m) => DiscreteMeasure::new(m.clone()).expect("validated measure"),
            _ => unreachable!("validated layout"),
        }
    }

    pub(crate) fn signed(&self) -> SignedMeasure {
        match self {
            Input::Measure(m) => SignedMeasure::new(m.clone()).expect("validated perturbation"),
            _ => unreachable!("validated layout"),
        }
    }

    pub(crate) fn family(&self) -> &ParamFamily {
        match self {
            Input::Family(f) => f,
            _ => unreachable!("validated layout"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn paths(doc: Value) -> Vec<String> {
        validate(&doc).into_iter().map(|f| f.path).collect()
    }

    #[test]
    fn negative_mass_is_located() {
        let doc = json!({"command": "matrix", "options": {"kind": "chi2"},
            "inputs": [{"mass": [0.5, 0.6, -0.1]}, {"mass": [0.2, 0.3, 0.5]}]});
        assert_eq!(paths(doc), vec!["/inputs/0/mass/2"]);
    }

    #[test]
    fn bernoulli_boundary_is_rejected() {
        let fam = |t: f64| json!({"kind": "BernoulliProd", "params": {"theta": [0.3, t]}});
        let doc = json!({"command": "codiv", "inputs": [fam(0.5), fam(1.0), fam(0.2)]});
        let found = validate(&doc);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].path, "/inputs/1/params/theta/1");
        assert!(found[0].message.contains("open interval"));
    }

    #[test]
    fn substochastic_kernel_is_rejected() {
        let doc = json!({"command": "dpi", "inputs": [
            {"mass": [0.5, 0.5]}, {"mass": [0.2, 0.8]},
            {"matrix": [[0.5, 0.4], [0.3, 0.7]]}]});
        let found = validate(&doc);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].path, "/inputs/2/matrix/0");
        assert!(found[0].message.contains("not row-stochastic"));
    }

    #[test]
    fn valid_jobs_have_no_findings() {
        let jobs = [
            json!({"command": "codiv", "inputs": [{"mass": [0.5, 0.5]}, {"mass": [0.2, 0.8]}, {"mass": [0.6, 0.4]}]}),
            json!({"command": "rank", "options": {"seed": 3}}),
            json!({"command": "expand", "options": {"phi": "hellinger"},
                "inputs": [{"mass": [0.5, 0.5]}, {"mass": [0.1, -0.1]}, {"mass": [-0.2, 0.2]}]}),
            json!({"command": "oracle-check", "options": {"phi": "alpha:0.25"}, "inputs": [
                {"kind": "PoissonProd", "params": {"lambda": [1.0]}},
                {"kind": "PoissonProd", "params": {"lambda": [2.0]}},
                {"kind": "PoissonProd", "params": {"lambda": [3.0]}}]}),
        ];
        for j in jobs {
            assert_eq!(validate(&j), Vec::new(), "{j}");
            assert!(JobSpec::from_value(&j).is_ok());
        }
    }

    #[test]
    fn command_specific_fields_are_required() {
        let m = json!({"mass": [1.0]});
        assert_eq!(paths(json!({"command": "matrix", "inputs": [m.clone(), m.clone()]})), vec!["/options/kind"]);
        assert_eq!(
            paths(json!({"command": "matrix", "inputs": [m.clone(), m.clone()], "options": {"kind": "vphi"}})),
            vec!["/options/phi"]
        );
        assert_eq!(paths(json!({"command": "dpi"})), vec!["/options/seed"]);
        assert_eq!(paths(json!({"command": "codiv", "inputs": [m.clone()]})), vec!["/inputs"]);
        assert_eq!(paths(json!({"command": "nope"})), vec!["/command"]);
        assert_eq!(paths(json!({"command": "codiv", "extra": 1, "inputs": [m.clone(), m.clone(), m]})), vec!["/extra"]);
    }

    #[test]
    fn mismatched_families_are_rejected() {
        let p = json!({"kind": "PoissonProd", "params": {"lambda": [1.0]}});
        let q = json!({"kind": "PoissonProd", "params": {"lambda": [1.0, 2.0]}});
        let b = json!({"kind": "BernoulliProd", "params": {"theta": [0.5]}});
        assert_eq!(paths(json!({"command": "codiv", "inputs": [p.clone(), q, b]})), vec!["/inputs/1/params", "/inputs/2/kind"]);
    }

    #[test]
    fn perturbations_need_zero_mass() {
        let doc = json!({"command": "expand",
            "inputs": [{"mass": [0.5, 0.5]}, {"mass": [0.1, 0.1]}, {"mass": [-0.2, 0.2]}]});
        assert_eq!(paths(doc), vec!["/inputs/1/mass"]);
    }
}
