use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use ivdf_cli::{execute, render, Cli, EXIT_CHECK_FAILED};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("ivdf: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    report.manifest.duration_seconds = start.elapsed().as_secs_f64();
    let text = render(&report, cli.format, cli.digits);
    if let Err(e) = emit(&text, cli.out.as_deref()) {
        eprintln!("ivdf: {e:#}");
        return ExitCode::from(ivdf_cli::EXIT_USAGE as u8);
    }
    if report.pass() {
        ExitCode::SUCCESS
    } else {
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!("ivdf: check failed: {} = {} (threshold {})", c.name, c.value, c.threshold);
        }
        ExitCode::from(EXIT_CHECK_FAILED as u8)
    }
}

fn emit(text: &str, out: Option<&std::path::Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("writing to stdout")?;
            Ok(())
        }
    }
}
