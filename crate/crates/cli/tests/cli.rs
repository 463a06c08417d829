use std::io::Write;
use std::process::Command;

use codivergence::{DivMatrix, ExtReal};
use serde_json::{json, Value};

fn run_job(job: &Value, extra: &[&str]) -> (i32, String) {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(job.to_string().as_bytes()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_codiv"))
        .arg("--input")
        .arg(file.path())
        .args(extra)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("{e}: {s}"))
}

fn poisson(l: f64) -> Value {
    json!({"kind": "PoissonProd", "params": {"lambda": [l]}})
}

#[test]
fn identical_measures_give_zero_matrix() {
    let p = json!({"mass": [0.2, 0.3, 0.5]});
    for kind in ["chi2", "hellinger", "vphi", "rphi"] {
        let job = json!({"command": "matrix", "inputs": [p, p, p, p], "options": {"kind": kind, "phi": "alpha:0.7"}});
        let (code, out) = run_job(&job, &[]);
        assert_eq!(code, 0, "{out}");
        let v = parse(&out);
        let m: DivMatrix = serde_json::from_value(v["result"]["matrix"].clone()).unwrap();
        assert_eq!(m.size, 3);
        assert!(m.entries.iter().all(|e| e.to_f64().abs() < 1e-15), "{kind}: {out}");
    }
}

#[test]
fn identity_kernel_gives_zero_difference() {
    let job = json!({"command": "dpi", "inputs": [
        {"mass": [0.2, 0.3, 0.5]}, {"mass": [0.1, 0.6, 0.3]}, {"mass": [0.4, 0.4, 0.2]},
        {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}]});
    let (code, out) = run_job(&job, &[]);
    assert_eq!(code, 0, "{out}");
    let v = parse(&out);
    assert!(v["result"]["difference"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
    assert_eq!(v["result"]["holds"], true);
}

#[test]
fn poisson_codiv_reports_e_squared_minus_one() {
    let job = json!({"command": "codiv", "inputs": [poisson(1.0), poisson(2.0), poisson(3.0)], "options": {"phi": "chi2"}});
    let (code, out) = run_job(&job, &[]);
    assert_eq!(code, 0, "{out}");
    let value = parse(&out)["result"]["value"].as_f64().unwrap();
    assert!((value - 2.0f64.exp_m1()).abs() <= 1e-12 * value);
}

#[test]
fn validation_findings_exit_two() {
    let cases = [
        (
            json!({"command": "matrix", "options": {"kind": "chi2"}, "inputs": [{"mass": [0.5, 0.6, -0.1]}, {"mass": [0.2, 0.3, 0.5]}]}),
            "/inputs/0/mass/2",
            "negative",
        ),
        (
            json!({"command": "codiv", "inputs": [
                {"kind": "BernoulliProd", "params": {"theta": [0.5]}},
                {"kind": "BernoulliProd", "params": {"theta": [1.0]}},
                {"kind": "BernoulliProd", "params": {"theta": [0.2]}}]}),
            "/inputs/1/params/theta/0",
            "open interval",
        ),
        (
            json!({"command": "dpi", "inputs": [{"mass": [0.5, 0.5]}, {"mass": [0.2, 0.8]}, {"matrix": [[0.5, 0.4], [0.3, 0.7]]}]}),
            "/inputs/2/matrix/0",
            "not row-stochastic",
        ),
    ];
    for (job, path, needle) in cases {
        let (code, out) = run_job(&job, &[]);
        assert_eq!(code, 2, "{out}");
        let v = parse(&out);
        assert_eq!(v["error"]["code"], "validation");
        let findings = v["error"]["findings"].as_array().unwrap();
        assert_eq!(findings.len(), 1, "{out}");
        assert_eq!(findings[0]["path"], path);
        assert!(findings[0]["message"].as_str().unwrap().contains(needle));
    }
}

#[test]
fn malformed_json_exits_two() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(b"{not json").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_codiv")).arg("--input").arg(file.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(parse(&String::from_utf8(out.stdout).unwrap())["error"]["code"], "parse_error");
}

#[test]
fn computation_errors_exit_three() {
    let job = json!({"command": "expand", "options": {"off_support": true},
        "inputs": [{"mass": [1.0, 0.0]}, {"mass": [0.1, -0.1]}, {"mass": [-0.2, 0.2]}]});
    let (code, out) = run_job(&job, &[]);
    assert_eq!(code, 3, "{out}");
    let v = parse(&out);
    assert!(v["error"]["code"].is_string() && v["error"]["message"].is_string());
}

#[test]
fn property_violations_exit_four() {
    let job = json!({"command": "oracle-check", "options": {"phi": "alpha:0.5"},
        "inputs": [poisson(1.0), poisson(2.0), poisson(3.0)]});
    let (code, out) = run_job(&job, &[]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(parse(&out)["result"]["passed"], true);
    // A vanishing tolerance turns any rounding difference into a violation.
    let (code, out) = run_job(&job, &["--tolerance", "1e-300"]);
    let v = parse(&out);
    if v["result"]["relative_error"].as_f64().unwrap() > 1e-300 {
        assert_eq!(code, 4, "{out}");
        assert_eq!(v["error"]["code"], "property_violation");
    }
}

#[test]
fn reports_are_byte_identical_and_seeded() {
    let job = json!({"command": "rank", "options": {"trials": 10}});
    let (a_code, a) = run_job(&job, &["--seed", "42"]);
    let (_, b) = run_job(&job, &["--seed", "42"]);
    assert_eq!(a_code, 0, "{a}");
    assert_eq!(a, b);
    assert_eq!(parse(&a)["seed"], 42);
    let (code, out) = run_job(&job, &[]);
    assert_eq!(code, 2, "{out}");
}

#[test]
fn infinite_cells_round_trip() {
    let job = json!({"command": "matrix", "options": {"kind": "chi2"},
        "inputs": [{"mass": [0.5, 0.5, 0.0]}, {"mass": [0.2, 0.3, 0.5]}, {"mass": [0.6, 0.4, 0.0]}]});
    let (code, out) = run_job(&job, &[]);
    assert_eq!(code, 0, "{out}");
    let v = parse(&out);
    assert_eq!(v["result"]["psd"]["status"], "not_applicable");
    let m: DivMatrix = serde_json::from_value(v["result"]["matrix"].clone()).unwrap();
    assert_eq!(m.get(0, 0), ExtReal::PosInf);
    assert!(m.get(1, 1).is_finite());
    // Re-serializing the parsed matrix reproduces the original cells.
    assert_eq!(serde_json::to_value(&m).unwrap(), v["result"]["matrix"]);

    let (code, csv) = run_job(&job, &["--format", "csv"]);
    assert_eq!(code, 0);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("inf,inf"));
}

#[test]
fn command_flag_overrides_job() {
    let p = json!({"mass": [0.25, 0.75]});
    let q = json!({"mass": [0.5, 0.5]});
    let job = json!({"command": "matrix", "inputs": [p, q, q], "options": {"kind": "chi2"}});
    let (code, out) = run_job(&job, &["--command", "codiv"]);
    assert_eq!(code, 0, "{out}");
    let v = parse(&out);
    assert_eq!(v["command"], "codiv");
    // χ²(P0 | Q, Q) = Σ (q − p)²/p = 0.0625/0.25 + 0.0625/0.75.
    let want = 0.0625 / 0.25 + 0.0625 / 0.75;
    assert!((v["result"]["value"].as_f64().unwrap() - want).abs() < 1e-15);
}

#[test]
fn expansion_job_reports_decay() {
    let job = json!({"command": "expand", "options": {"phi": "hellinger"},
        "inputs": [{"mass": [0.2, 0.3, 0.5]}, {"mass": [0.1, -0.05, -0.05]}, {"mass": [-0.1, 0.2, -0.1]}]});
    let (code, out) = run_job(&job, &[]);
    assert_eq!(code, 0, "{out}");
    let v = parse(&out);
    assert_eq!(v["result"]["vphi"]["verdict"], "decaying");
    let (code, csv) = run_job(&job, &["--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn shipped_example_jobs_succeed() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/jobs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let job = parse(&std::fs::read_to_string(&path).unwrap());
        let (code, out) = run_job(&job, &[]);
        assert_eq!(code, 0, "{}: {out}", path.display());
        seen += 1;
    }
    assert!(seen >= 5);
}
