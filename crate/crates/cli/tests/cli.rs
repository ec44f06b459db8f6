use std::process::{Command, Output};

use rug::Complete;
use serde_json::Value;

fn ivdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivdf")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn price_report_has_manifest_and_agreeing_pricers() {
    let out = ivdf(&["price", "--spot", "1", "--strike", "1", "--maturity", "1", "--sigma", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["manifest"]["command"], "price");
    assert_eq!(v["manifest"]["parameters"]["sigma"], "0.2");
    assert_eq!(v["precision_bits"], 256);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    // At the money with r = 0 the price is 2N(σ/2) - 1; N(0.1) = 0.539827837277...
    let p: f64 = v["outputs"]["price_closed_form"].as_str().unwrap().parse().unwrap();
    assert!((p - (2.0 * 0.539_827_837_277_029 - 1.0)).abs() < 1e-14);
}

#[test]
fn expression_flags_match_their_decimal_values() {
    let a = json(&ivdf(&["F-inv", "--y", "1/(2e)"]));
    let b = json(&ivdf(&["F-inv", "--y", "0.18393972058572116079776188508073043372290556551588391725391840084873074787244910"]));
    let va: f64 = a["outputs"]["value"].as_str().unwrap().parse().unwrap();
    let vb: f64 = b["outputs"]["value"].as_str().unwrap().parse().unwrap();
    assert_eq!(va, vb);
}

#[test]
fn usage_errors_exit_with_code_two() {
    for args in [
        &["implied-vol", "--spot", "1", "--strike", "2", "--maturity", "1", "--call", "5"][..],
        &["F-inv", "--y", "0.5"][..],
        &["f", "--strike", "1/("][..],
        &["suite", "--level", "slow"][..],
        &["guess", "--target", "file"][..],
    ] {
        let out = ivdf(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn failed_checks_exit_with_code_one() {
    // The sharp-ratio check reports the ratio above 1 and non-monotone.
    let out = ivdf(&["asympt", "--kind", "FINV_SHARP", "--grid-min", "1e-8", "--grid-max", "1e-4", "--points", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert!(v["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false));
}

#[test]
fn csv_out_file_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("leading.csv");
    let args = [
        "asympt",
        "--kind",
        "F_LEADING_ORDER",
        "--format",
        "csv",
        "--digits",
        "8",
        "--out",
        path.to_str().unwrap(),
    ];
    let out = ivdf(&args);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let first = std::fs::read_to_string(&path).unwrap();
    assert!(first.lines().next().unwrap().contains(','));
    assert_eq!(first.lines().count(), 1 + 8, "header plus the default 8 grid points");
    ivdf(&args);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn guess_on_rational_file_finds_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.txt");
    let lines: Vec<String> = (0..40u32).map(|n| format!("1/{}", rug::Integer::factorial(n).complete())).collect();
    std::fs::write(&path, lines.join("\n")).unwrap();
    let out = ivdf(&[
        "guess", "--target", "file", "--file", path.to_str().unwrap(), "--rmax", "2", "--dmax", "2", "--ncoeffs", "40",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["outputs"]["report"]["status"], "FOUND");
}

#[test]
fn text_format_lists_checks() {
    let out = ivdf(&["--format", "text", "F", "--x", "1"]);
    assert!(out.status.success());
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.starts_with("AUX_F"), "{s}");
}
