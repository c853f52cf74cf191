//! Merges run artifacts into one summary keyed by `(subcommand, config)`.
//!
//! JSON run records carry their own key. A sweep CSV is keyed by the
//! dimension, the sorted `n` values and the degree pairs found in its rows.
//! Mesh documents and earlier summaries are skipped; other CSV files (matrix
//! and weight dumps) are not run records and are ignored as well.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use tracelab::spectral::{SpectralReport, CSV_HEADER};
use tracelab::{Result, TraceLabError};

pub const SUMMARY_FORMAT: &str = "tracelab-summary";

struct Entry {
    subcommand: String,
    config: Value,
    passed: bool,
    results: Value,
    source: String,
}

fn malformed(path: &Path, reason: impl Into<String>) -> TraceLabError {
    TraceLabError::Artifact { path: path.display().to_string(), reason: reason.into() }
}

/// Serializes with object keys sorted at every level, whatever the map type.
fn canonical(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let body: Vec<String> =
                keys.iter().map(|k| format!("{}:{}", Value::String((*k).clone()), canonical(&m[*k]))).collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

fn from_json(path: &Path, name: String, text: &str) -> Result<Option<Entry>> {
    let v: Value = serde_json::from_str(text).map_err(|e| malformed(path, e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| malformed(path, "top level is not an object"))?;
    if obj.contains_key("format") {
        return Ok(None);
    }
    let subcommand = obj
        .get("subcommand")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(path, "missing string field 'subcommand'"))?;
    let config = obj.get("config").filter(|c| c.is_object()).ok_or_else(|| malformed(path, "missing object 'config'"))?;
    let passed = obj.get("passed").and_then(Value::as_bool).ok_or_else(|| malformed(path, "missing boolean 'passed'"))?;
    Ok(Some(Entry {
        subcommand: subcommand.into(),
        config: config.clone(),
        passed,
        results: obj.get("results").cloned().unwrap_or(Value::Null),
        source: name,
    }))
}

fn from_sweep_csv(path: &Path, name: String, text: &str) -> Result<Entry> {
    let report = SpectralReport::from_csv(text).map_err(|e| malformed(path, e.to_string()))?;
    let mut dims: Vec<usize> = report.records.iter().map(|r| r.dim).collect();
    let mut ns: Vec<usize> = report.records.iter().map(|r| r.n).collect();
    let mut degrees: Vec<(usize, usize)> = report.records.iter().map(|r| (r.k_cell, r.k_face)).collect();
    for v in [&mut dims, &mut ns] {
        v.sort_unstable();
        v.dedup();
    }
    degrees.sort_unstable();
    degrees.dedup();
    let degrees: Vec<String> = degrees.iter().map(|(c, f)| format!("{c}/{f}")).collect();
    Ok(Entry {
        subcommand: "evp-sweep".into(),
        config: json!({ "dim": dims, "n": ns, "degrees": degrees }),
        passed: report.failures.is_empty(),
        results: json!({ "records": report.records, "successive_ratios": report.successive_ratios() }),
        source: name,
    })
}

fn collect(dir: &Path) -> Result<Vec<Entry>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        if !path.is_file() {
            continue;
        }
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext != "json" && ext != "csv" {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| malformed(&path, e.to_string()))?;
        match ext {
            "json" => out.extend(from_json(&path, name, &text)?),
            _ => {
                let first = text.lines().next().unwrap_or("").trim();
                if first == CSV_HEADER {
                    out.push(from_sweep_csv(&path, name, &text)?);
                } else if first.starts_with("dim,n,") {
                    return Err(malformed(&path, format!("sweep header does not match {CSV_HEADER:?}")));
                }
            }
        }
    }
    Ok(out)
}

/// Builds the summary document. Duplicate keys with identical content are
/// merged; differing content is an error naming both files.
pub fn summarize(dir: &Path) -> Result<Value> {
    let mut merged: BTreeMap<(String, String), (Entry, Vec<String>)> = BTreeMap::new();
    for e in collect(dir)? {
        let key = (e.subcommand.clone(), canonical(&e.config));
        match merged.get_mut(&key) {
            Some((first, sources)) => {
                if first.passed != e.passed || canonical(&first.results) != canonical(&e.results) {
                    return Err(TraceLabError::InvalidArgument(format!(
                        "conflicting results for {} {} in {} and {}",
                        key.0, key.1, first.source, e.source
                    )));
                }
                sources.push(e.source);
            }
            None => {
                let sources = vec![e.source.clone()];
                merged.insert(key, (e, sources));
            }
        }
    }
    let entries: Vec<Value> = merged
        .into_values()
        .map(|(e, sources)| {
            let mut m = Map::new();
            m.insert("subcommand".into(), e.subcommand.into());
            m.insert("config".into(), e.config);
            m.insert("passed".into(), e.passed.into());
            m.insert("sources".into(), json!(sources));
            m.insert("results".into(), e.results);
            Value::Object(m)
        })
        .collect();
    let all_passed = entries.iter().all(|e| e["passed"] == Value::Bool(true));
    Ok(json!({ "format": SUMMARY_FORMAT, "version": 1, "all_passed": all_passed, "entries": entries }))
}

pub fn run(dir: &Path, output: Option<&Path>) -> Result<bool> {
    let summary = summarize(dir)?;
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    match output {
        Some(path) => {
            fs::write(path, text)?;
            let n = summary["entries"].as_array().map_or(0, Vec::len);
            println!("report: {n} entries from {} written to {}", dir.display(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(true)
}
