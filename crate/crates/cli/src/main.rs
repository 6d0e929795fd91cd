#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod exec;
mod job;
mod output;

use args::{to_job, Cli};
use clap::error::ErrorKind;
use clap::Parser;
use exec::{execute, Failure};

fn fail(command: &str, f: &Failure) -> i32 {
    eprintln!("{}", f.to_json(command));
    f.exit_code()
}

/// Worker count from HEATLAB_THREADS; unset means the rayon default.
fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("HEATLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::invalid(format!("HEATLAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::invalid(e.to_string()))
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let f = Failure { kind: "Usage".into(), message: e.to_string().trim().to_string(), validation: true, inputs: None };
            return fail("", &f);
        }
    };
    if let Err(f) = configure_threads() {
        return fail("", &f);
    }
    let (job, out) = match to_job(&cli.command) {
        Ok(x) => x,
        Err(msg) => return fail("", &Failure::invalid(msg)),
    };
    let name = job.command.name();
    if out.emit_job {
        return match job.to_toml() {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(msg) => fail(name, &Failure::invalid(msg)),
        };
    }
    let rows = match execute(&job) {
        Ok(rows) => rows,
        Err(f) => return fail(name, &f),
    };
    let text = match output::render(name, &rows, job.output.format) {
        Ok(t) => t,
        Err(msg) => return fail(name, &Failure { kind: "Output".into(), message: msg, validation: false, inputs: None }),
    };
    match &job.output.path {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                return fail(name, &Failure::invalid(format!("cannot write {p}: {e}")));
            }
        }
        None => print!("{text}"),
    }
    0
}

fn main() {
    std::process::exit(run());
}
