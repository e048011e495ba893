use std::path::Path;

use ddf::format::{read_pdf, write_grid_csv, Pdf};
use ddf::scenario::{scenario_from_json, scenario_to_json};
use ddf::{fixtures, Error};
use ddf_core::hybrid::HybridBelief;
use ddf_core::pdf::{DiscreteDist, Gaussian, GaussianMixture, Grid, GridPdf};
use ddf_core::sim::Scenario;

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn numbers(v: &serde_json::Value, out: &mut Vec<f64>) {
    match v {
        serde_json::Value::Number(n) => out.push(n.as_f64().unwrap()),
        serde_json::Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        serde_json::Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

fn assert_round_trip(pdf: &Pdf) {
    let text = pdf.to_json();
    let back = Pdf::from_json(&text).unwrap();
    assert_eq!(back.kind(), pdf.kind());
    assert!(back == *pdf, "{} did not load bit for bit", pdf.kind());
    let (mut a, mut b) = (Vec::new(), Vec::new());
    numbers(&serde_json::to_value(pdf.to_doc()).unwrap(), &mut a);
    numbers(&serde_json::to_value(back.to_doc()).unwrap(), &mut b);
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| rel_close(*x, *y)), "{} values drifted", pdf.kind());
}

fn grid_pdf() -> GridPdf {
    let grid = Grid::new(vec![(-1.0, 2.0), (0.0, 1.0)], vec![7, 5]).unwrap();
    GridPdf::from_density(grid, |x| 1.0 + x[0] * x[0] + (3.0 * x[1]).sin().abs()).unwrap()
}

#[test]
fn every_kind_round_trips() {
    let g = Gaussian::from_slices(&[0.1, -2.0 / 3.0], &[1.0 / 3.0, 0.1, 0.1, 2.5]).unwrap();
    assert_round_trip(&Pdf::Gaussian(g.clone()));
    let (a, _) = fixtures::gm14_pair();
    assert_round_trip(&Pdf::Mixture(a));
    assert_round_trip(&Pdf::Grid(grid_pdf()));
    assert_round_trip(&Pdf::Discrete(DiscreteDist::from_weights(vec![1.0, 2.0, 3.0, 1e-300]).unwrap()));
    let h = HybridBelief::new(DiscreteDist::from_weights(vec![0.3, 0.7]).unwrap(), vec![grid_pdf(), grid_pdf()]).unwrap();
    assert_round_trip(&Pdf::Hybrid(h));
}

fn field_of(text: &str) -> String {
    match Pdf::from_json(text) {
        Err(Error::Field { field, .. }) => field,
        other => panic!("expected a field error, got {other:?}"),
    }
}

#[test]
fn parse_errors_name_the_field() {
    assert_eq!(field_of(r#"{"kind":"gaussian","mean":[0.0],"cov":[[1.0, 0.0]]}"#), "cov");
    assert_eq!(field_of(r#"{"kind":"gaussian","mean":[0.0],"cov":[[-1.0]]}"#), "cov");
    assert_eq!(field_of(r#"{"kind":"gm","components":[{"weight":1.0,"mean":"x","cov":[[1.0]]}]}"#), "components[0].mean");
    assert_eq!(
        field_of(r#"{"kind":"gm","components":[{"weight":0.5,"mean":[0.0],"cov":[[1.0]]},{"weight":0.4,"mean":[1.0],"cov":[[1.0]]}]}"#),
        "components[*].weight"
    );
    assert_eq!(field_of(r#"{"kind":"discrete","probs":[0.5,0.6]}"#), "probs");
    assert!(!field_of(r#"{"kind":"discrete","probs":[0.5,0.5],"extra":1}"#).is_empty());
    assert_eq!(field_of(r#"{"kind":"grid","bounds":[[0,1]],"shape":[2],"mass":[1.0]}"#), "mass");
    assert_eq!(field_of(r#"{"kind":"hybrid","regions":[1.0],"conditionals":[{"kind":"discrete","probs":[1.0]}]}"#), "conditionals[0].kind");
    assert_eq!(field_of(r#"{"kind":"banana"}"#), "kind");
}

#[test]
fn grid_csv_has_one_row_per_cell() {
    let pdf = grid_pdf();
    let mut buf = Vec::new();
    write_grid_csv(&mut buf, &pdf).unwrap();
    let mut r = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(r.headers().unwrap(), vec!["x", "y", "mass"]);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), pdf.len());
    for (i, row) in rows.iter().enumerate() {
        let c = pdf.grid().center(i);
        assert_eq!(row[0].parse::<f64>().unwrap(), c[0]);
        assert_eq!(row[1].parse::<f64>().unwrap(), c[1]);
        assert_eq!(row[2].parse::<f64>().unwrap(), pdf.mass()[i]);
    }
}

#[test]
fn scenario_files_round_trip_exactly() {
    let s = Scenario::search_reproduction();
    assert_eq!(scenario_from_json(&scenario_to_json(&s)).unwrap(), s);
}

#[test]
fn scenario_errors_name_the_field() {
    let mut v: serde_json::Value = serde_json::from_str(&scenario_to_json(&Scenario::search_reproduction())).unwrap();
    v["agents"][1]["sensor"]["p_max"] = 1.5.into();
    match scenario_from_json(&v.to_string()) {
        Err(Error::Field { field, .. }) => assert_eq!(field, "agents[1].sensor"),
        other => panic!("{other:?}"),
    }
    v["agents"][1]["sensor"]["p_max"] = "high".into();
    match scenario_from_json(&v.to_string()) {
        Err(Error::Field { field, .. }) => assert_eq!(field, "agents[1].sensor.p_max"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn committed_fixtures_match_the_generator() {
    let committed = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let fresh = tempfile::tempdir().unwrap();
    fixtures::write_all(fresh.path()).unwrap();
    for name in fixtures::ALL {
        let a = std::fs::read(committed.join(name)).unwrap();
        let b = std::fs::read(fresh.path().join(name)).unwrap();
        assert!(a == b, "{name} differs from the generator output");
    }
    let gm14 = read_pdf(&committed.join(fixtures::GM14_I)).unwrap().into_mixture().unwrap();
    assert_eq!(gm14.len(), 14);
    let _: GaussianMixture = gm14;
}
