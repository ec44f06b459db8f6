//! Report envelope shared by every command and its JSON, CSV and text
//! renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ivdf_core::precision::{to_decimal, to_decimal_digits};
use ivdf_core::{PrecisionConfig, XReal};
use serde::Serialize;
use serde_json::{json, Value};

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub precision: PrecisionEcho,
    pub tool_version: String,
    /// Wall-clock seconds; the only field allowed to differ between reruns.
    pub duration_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrecisionEcho {
    pub working_bits: u32,
    pub quad_rel_tol: String,
    pub root_rel_tol: String,
}

impl PrecisionEcho {
    pub fn of(cfg: &PrecisionConfig) -> Self {
        PrecisionEcho {
            working_bits: cfg.working_bits,
            quad_rel_tol: to_decimal_digits(&cfg.quad_rel_tol, 6),
            root_rel_tol: to_decimal_digits(&cfg.root_rel_tol, 6),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: String,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: impl Into<String>, threshold: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            value: value.into(),
            threshold: threshold.into(),
            pass,
        }
    }

    /// `value <= threshold`, both printed with 12 significant digits.
    pub fn at_most(name: impl Into<String>, value: &XReal, threshold: &XReal) -> Self {
        Check::new(
            name,
            to_decimal_digits(value, 12),
            to_decimal_digits(threshold, 12),
            value <= threshold,
        )
    }
}

/// Columns for CSV output of grid-valued commands.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<XReal>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub manifest: Manifest,
    pub kind: String,
    pub precision_bits: u32,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Value,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub table: Option<Table>,
}

impl Report {
    pub fn new(command: &str, kind: &str, cfg: &PrecisionConfig) -> Self {
        Report {
            manifest: Manifest {
                command: command.to_string(),
                parameters: BTreeMap::new(),
                precision: PrecisionEcho::of(cfg),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                duration_seconds: 0.0,
            },
            kind: kind.to_string(),
            precision_bits: cfg.working_bits,
            inputs: BTreeMap::new(),
            outputs: json!({}),
            checks: Vec::new(),
            table: None,
        }
    }

    /// Records a flag both as a manifest parameter and as an input.
    pub fn param(&mut self, name: &str, raw: &str, value: Option<&XReal>) {
        self.manifest.parameters.insert(name.to_string(), raw.to_string());
        let shown = value.map(to_decimal).unwrap_or_else(|| raw.to_string());
        self.inputs.insert(name.to_string(), shown);
    }

    /// Manifest-only parameter (options that are not numeric inputs).
    pub fn option(&mut self, name: &str, raw: impl ToString) {
        self.manifest.parameters.insert(name.to_string(), raw.to_string());
    }

    pub fn output(&mut self, name: &str, v: impl Into<Value>) {
        self.outputs
            .as_object_mut()
            .expect("outputs is an object")
            .insert(name.to_string(), v.into());
    }

    pub fn real(&mut self, name: &str, v: &XReal) {
        self.output(name, to_decimal(v));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// JSON with the duration removed, for reproducibility comparisons.
    pub fn to_json_without_duration(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        strip_durations(&mut v);
        serde_json::to_string_pretty(&v).expect("values serialize")
    }

    /// CSV of the grid table when present, else `name,value` rows of the
    /// scalar outputs.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::new();
        match &self.table {
            Some(t) => {
                out.push_str(&t.columns.join(","));
                out.push('\n');
                for row in &t.rows {
                    let cells: Vec<String> = row.iter().map(|v| to_decimal_digits(v, digits)).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
            }
            None => {
                out.push_str("name,value\n");
                for (k, v) in flatten(&self.outputs) {
                    let _ = writeln!(out, "{k},{}", csv_field(&v));
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({} bits)", self.kind, self.precision_bits);
        for (k, v) in &self.inputs {
            let _ = writeln!(out, "  input  {k} = {v}");
        }
        for (k, v) in flatten(&self.outputs) {
            let _ = writeln!(out, "  output {k} = {v}");
        }
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "  [{mark}] {}: {} (threshold {})", c.name, c.value, c.threshold);
        }
        out
    }
}

fn strip_durations(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.starts_with("duration"));
            for x in map.values_mut() {
                strip_durations(x);
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(strip_durations),
        _ => {}
    }
}

/// Dotted paths to every leaf of a JSON value.
fn flatten(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            Value::Array(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), x, out);
                }
            }
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let cfg = PrecisionConfig::new(128).unwrap();
        let mut r = Report::new("f", "F", &cfg);
        r.param("x", "1/2", Some(&cfg.real(0.5)));
        r.real("value", &cfg.real(0.25));
        r.output("nested", json!({"a": ["1", "2"]}));
        r.check(Check::at_most("small", &cfg.real(1e-40), &cfg.real(1e-30)));
        r.manifest.duration_seconds = 1.5;
        r
    }

    #[test]
    fn json_envelope_has_schema_fields() {
        let v: Value = serde_json::from_str(&sample().to_json()).unwrap();
        for key in ["manifest", "kind", "inputs", "outputs", "checks", "precision_bits"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["checks"][0]["pass"], true);
        assert_eq!(v["manifest"]["parameters"]["x"], "1/2");
    }

    #[test]
    fn duration_is_excluded_from_comparison_form() {
        let a = sample();
        let mut b = sample();
        b.manifest.duration_seconds = 99.0;
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(a.to_json_without_duration(), b.to_json_without_duration());
    }

    #[test]
    fn csv_and_text_list_every_leaf() {
        let r = sample();
        let csv = r.to_csv(30);
        assert!(csv.starts_with("name,value\n"));
        assert!(csv.contains("nested.a[1],2"));
        let text = r.to_text();
        assert!(text.contains("[PASS] small"));
    }

    #[test]
    fn csv_table_uses_requested_digits() {
        let cfg = PrecisionConfig::new(128).unwrap();
        let mut r = Report::new("asympt", "A", &cfg);
        r.table = Some(Table {
            columns: vec!["x".into(), "ratio".into()],
            rows: vec![vec![cfg.real(1) / 3u32, cfg.real(2)]],
        });
        let csv = r.to_csv(5);
        assert_eq!(csv.lines().nth(1).unwrap(), "3.3333e-1,2.0000");
    }
}
