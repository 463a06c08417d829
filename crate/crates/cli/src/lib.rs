//! Command-line front-end for the `codivergence` library: reads a JSON job,
//! validates it, runs it and renders a deterministic JSON or CSV report.

pub mod job;
pub mod output;
pub mod run;

pub use job::{validate, Finding, JobSpec};
pub use run::{run, Document, Exit, Outcome};

use job::Format;

/// Rendered output of one invocation.
pub struct Rendered {
    pub text: String,
    pub exit: Exit,
}

/// Validates, runs and renders a job document. Errors are always JSON.
pub fn execute(doc: &serde_json::Value) -> Rendered {
    let job = match JobSpec::from_value(doc) {
        Ok(job) => job,
        Err(findings) => return render_json(&Document::validation(findings), Exit::Validation),
    };
    let Outcome { document, exit } = run(&job);
    match (&document.result, job.options.format, exit) {
        (Some(report), Format::Csv, Exit::Success) => {
            let (header, rows) = report.csv();
            match output::to_csv(&header, &rows) {
                Ok(text) => Rendered { text, exit },
                Err(e) => render_json(&Document::failure("output", e.to_string(), None), Exit::Computation),
            }
        }
        _ => render_json(&document, exit),
    }
}

/// Parses job text; malformed JSON is a validation error.
pub fn execute_str(text: &str) -> Rendered {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(doc) => execute(&doc),
        Err(e) => render_json(&Document::failure("parse_error", e.to_string(), None), Exit::Validation),
    }
}

fn render_json(doc: &Document, exit: Exit) -> Rendered {
    let text = output::to_json(doc).expect("report documents always serialize");
    Rendered { text, exit }
}
