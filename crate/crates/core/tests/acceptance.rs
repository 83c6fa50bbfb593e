//! Runs the acceptance battery over the shipped corpus and prints one line per criterion.

use std::path::Path;
use std::process::ExitCode;

use pqreg::suite::{verify_suite, CRITERIA};

fn main() -> ExitCode {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let seed = 0;
    println!("acceptance battery: corpus {} seed {seed}", corpus.display());
    let report = match verify_suite(&corpus, seed, &mut |o| {
        println!("{}", o.line());
        for f in &o.failures {
            println!("    {f}");
        }
    }) {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance battery could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let passed = report.outcomes.iter().filter(|o| o.passed).count();
    let covered = report.outcomes.len();
    println!("acceptance: {passed}/{covered} criteria passed ({CRITERIA} defined)");
    if covered as u8 != CRITERIA {
        println!("acceptance: corpus does not cover every criterion");
        return ExitCode::FAILURE;
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
