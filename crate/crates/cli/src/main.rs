use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use codivergence_cli::{execute, job::Command, run::Document, Exit};
use serde_json::{json, Value};

/// Codivergences, divergence matrices and their property checks.
#[derive(Parser, Debug)]
#[command(name = "codiv", version)]
struct Args {
    /// Job specification (JSON); `-` reads standard input.
    #[arg(long, short)]
    input: PathBuf,

    /// Overrides the job's command.
    #[arg(long, value_parser = Command::ALL.map(|c| c.name()))]
    command: Option<String>,

    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,

    #[arg(long)]
    tolerance: Option<f64>,

    /// Seed for the randomized dpi/rank suites.
    #[arg(long)]
    seed: Option<u64>,
}

fn read(path: &PathBuf) -> std::io::Result<String> {
    if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    }
}

fn fail(code: &str, message: String) -> ExitCode {
    let doc = Document::failure(code, message, None);
    print!("{}", codivergence_cli::output::to_json(&doc).expect("error documents serialize"));
    ExitCode::from(Exit::Validation as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match read(&args.input) {
        Ok(t) => t,
        Err(e) => return fail("io_error", format!("{}: {e}", args.input.display())),
    };
    let mut doc: Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return fail("parse_error", e.to_string()),
    };
    if let Some(root) = doc.as_object_mut() {
        if let Some(c) = args.command {
            root.insert("command".into(), json!(c));
        }
        let opts = root.entry("options").or_insert_with(|| json!({}));
        if let Some(o) = opts.as_object_mut() {
            if let Some(f) = args.format {
                o.insert("format".into(), json!(f));
            }
            if let Some(t) = args.tolerance {
                o.insert("tolerance".into(), json!(t));
            }
            if let Some(s) = args.seed {
                o.insert("seed".into(), json!(s));
            }
        }
    }
    let out = execute(&doc);
    print!("{}", out.text);
    ExitCode::from(out.exit as u8)
}
