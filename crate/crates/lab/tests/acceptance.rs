//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are printed even when everything passes, and runs
//! the criteria one after another so their timings do not overlap.

use std::process::ExitCode;

use lil_lab::suites::{criteria, run_criterion};

fn main() -> ExitCode {
    let mut failed = 0;
    for c in criteria() {
        let outcome = run_criterion(&c);
        println!("{}", outcome.line());
        if !outcome.passed() {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
