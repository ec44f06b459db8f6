//! Acceptance run: criteria 1 to 8 at full size, then criterion 9 by
//! running the whole suite a second time and comparing the JSON reports
//! with durations removed. Prints one line per criterion and exits nonzero
//! if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use ivdf_cli::suite::{report, run_all, Level};

fn main() -> ExitCode {
    let start = Instant::now();
    let first = run_all(Level::Full);
    for o in &first {
        println!("{}  [{:.1} s]", o.line(), o.duration_seconds);
        for c in o.checks.iter().filter(|c| !c.pass) {
            println!("    failed: {} = {} (threshold {})", c.name, c.value, c.threshold);
        }
    }

    let second = run_all(Level::Full);
    let a = report(Level::Full, &first).map(|r| r.to_json_without_duration());
    let b = report(Level::Full, &second).map(|r| r.to_json_without_duration());
    let deterministic = match (&a, &b) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    let verdict = if deterministic { "PASS" } else { "FAIL" };
    println!("criterion 9 {verdict} determinism: full-suite JSON identical across two runs (durations excluded)");
    if !deterministic {
        if let (Ok(a), Ok(b)) = (&a, &b) {
            if let Some((i, (x, y))) = a.lines().zip(b.lines()).enumerate().find(|(_, (x, y))| x != y) {
                println!("    first difference at line {}: `{x}` vs `{y}`", i + 1);
            }
        }
    }

    let failed: Vec<u32> = first
        .iter()
        .filter(|o| !o.pass)
        .map(|o| o.id)
        .chain((!deterministic).then_some(9))
        .collect();
    println!(
        "acceptance: {} of 9 criteria pass in {:.0} s",
        9 - failed.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
