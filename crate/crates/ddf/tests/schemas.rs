use std::fs;
use std::path::{Path, PathBuf};

use ddf::checks::{oracle_check, CheckSettings};
use ddf::commands::{fuse_demo, gm_fuse, omega_sweep, search_sim, FuseMode, FuseRequest, McSettings, SimRequest, SweepRequest};
use ddf::fixtures;
use ddf::scenario::{read_scenario, write_scenario};
use ddf_core::mixture::Execution;
use serde_json::{Map, Value};

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn load(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn validator(name: &str) -> (jsonschema::Validator, Value) {
    let schema = load(&repo("schemas").join(name));
    (jsonschema::validator_for(&schema).unwrap_or_else(|e| panic!("{name}: {e}")), schema)
}

fn check_json(schema: &str, file: &Path) {
    let (v, _) = validator(schema);
    let doc = load(file);
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{} against {schema}: {errors:?}", file.display());
}

fn types(prop: &Value) -> Vec<&str> {
    match &prop["type"] {
        Value::String(t) => vec![t.as_str()],
        Value::Array(ts) => ts.iter().filter_map(Value::as_str).collect(),
        _ => vec!["string"],
    }
}

/// Types a CSV cell by the column's declared type, so "3" in a string
/// column stays a string.
fn cell(raw: &str, prop: &Value) -> Value {
    let t = types(prop);
    if raw.is_empty() && t.contains(&"null") {
        return Value::Null;
    }
    if t.contains(&"boolean") {
        if let Ok(b) = raw.parse::<bool>() {
            return Value::Bool(b);
        }
    }
    if t.contains(&"integer") {
        if let Ok(i) = raw.parse::<u64>() {
            return i.into();
        }
    }
    if t.contains(&"number") {
        if let Ok(x) = raw.parse::<f64>() {
            return x.into();
        }
    }
    Value::String(raw.into())
}

fn check_csv(schema: &str, file: &Path) {
    let (v, s) = validator(schema);
    let columns: Vec<&str> = s["required"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let mut r = csv::Reader::from_path(file).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), columns, "{} header", file.display());
    for (rows, record) in r.records().enumerate() {
        let record = record.unwrap();
        let row: Map<String, Value> =
            columns.iter().zip(record.iter()).map(|(c, raw)| (c.to_string(), cell(raw, &s["properties"][*c]))).collect();
        let row = Value::Object(row);
        let error = v.iter_errors(&row).next().map(|e| e.to_string());
        if let Some(e) = error {
            panic!("{} row {rows} against {schema}: {e} in {row}", file.display());
        }
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn schema_for(file: &Path) -> (&'static str, bool) {
    let name = file.file_name().unwrap().to_str().unwrap();
    match name {
        "kld.json" => ("kld.schema.json", false),
        "diagnostics.json" => ("gm_fuse_diagnostics.schema.json", false),
        "summary.json" => ("run_summary.schema.json", false),
        "omega_sweep.json" => ("omega_sweep.schema.json", false),
        "oracle_check.json" => ("oracle_check.schema.json", false),
        "metrics.csv" => ("csv/metrics.schema.json", true),
        "observations.csv" => ("csv/observations.schema.json", true),
        "messages.csv" => ("csv/messages.schema.json", true),
        "omega_sweep.csv" => ("csv/omega_sweep.schema.json", true),
        n if n.ends_with(".csv") => ("csv/grid.schema.json", true),
        n if n.starts_with("search") => ("scenario.schema.json", false),
        _ => ("pdf.schema.json", false),
    }
}

fn fuse(p_i: &str, p_j: &str, mode: FuseMode, common: Option<&str>) -> FuseRequest {
    FuseRequest {
        p_i: repo("fixtures").join(p_i),
        p_j: repo("fixtures").join(p_j),
        common: common.map(|c| repo("fixtures").join(c)),
        mode,
        omega: None,
        grid: 60,
        mc: McSettings { samples: 400, ..McSettings::default() },
    }
}

#[test]
fn every_artifact_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);

    fuse_demo(&fuse(fixtures::GM3_I, fixtures::GM3_J, FuseMode::Wep, None), &out("wep")).unwrap();
    fuse_demo(&fuse(fixtures::GM3_I, fixtures::GM3_J, FuseMode::Exact, Some(fixtures::GAUSSIAN_I)), &out("exact")).unwrap();
    gm_fuse(&fuse(fixtures::GAUSSIAN_I, fixtures::GAUSSIAN_J, FuseMode::Wep, None), &out("gm")).unwrap();

    let mut sc = read_scenario(&repo("fixtures").join(fixtures::SCENARIO)).unwrap();
    sc.cells_per_axis = 12;
    let sc_path = out("scenario.json");
    write_scenario(&sc_path, &sc).unwrap();
    search_sim(&SimRequest { scenario: sc_path.clone(), seed: None, grid: None, execution: Execution::Sequential }, &out("sim")).unwrap();
    omega_sweep(
        &SweepRequest { scenario: sc_path.clone(), points: 3, seed: None, grid: None, execution: Execution::Sequential },
        &out("sweep"),
    )
    .unwrap();
    let settings = CheckSettings { seed: 1, samples: 200, grid: 40, execution: Execution::Sequential };
    oracle_check(&repo("fixtures"), &settings, &out("check")).unwrap();

    let mut seen = std::collections::BTreeSet::new();
    let mut files = walk(dir.path());
    files.extend(walk(&repo("fixtures")));
    for f in &files {
        let (schema, is_csv) = if f == &sc_path { ("scenario.schema.json", false) } else { schema_for(f) };
        if is_csv {
            check_csv(schema, f);
        } else {
            check_json(schema, f);
        }
        seen.insert(schema);
    }
    let shipped: std::collections::BTreeSet<String> = walk(&repo("schemas"))
        .iter()
        .map(|p| p.strip_prefix(repo("schemas")).unwrap().to_str().unwrap().to_string())
        .collect();
    let seen: std::collections::BTreeSet<String> = seen.into_iter().map(String::from).collect();
    assert_eq!(seen, shipped, "every shipped schema is exercised");
}

#[test]
fn schemas_reject_broken_documents() {
    let (pdf, _) = validator("pdf.schema.json");
    assert!(pdf.is_valid(&load(&repo("fixtures").join(fixtures::GM3_I))));
    assert!(!pdf.is_valid(&serde_json::json!({"kind": "gm", "components": []})));
    assert!(!pdf.is_valid(&serde_json::json!({"kind": "discrete", "probs": [0.5], "extra": 1})));
    assert!(!pdf.is_valid(&serde_json::json!({"kind": "hybrid", "regions": [1.0], "conditionals": [{"kind": "discrete", "probs": [1.0]}]})));
    let (sc, _) = validator("scenario.schema.json");
    let mut doc = load(&repo("fixtures").join(fixtures::SCENARIO));
    assert!(sc.is_valid(&doc));
    doc["mode"] = serde_json::json!({"kind": "wep_fixed"});
    assert!(!sc.is_valid(&doc));
}
