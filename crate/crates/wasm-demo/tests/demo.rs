use memscope_wasm_demo::{blobs, hull_overlap_json, measure_window_json, tsne_blobs_json, MAX_BLOB_POINTS};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("valid json")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

#[test]
fn overlapping_unit_squares() {
    let a = [0.0, 0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 2.0];
    let b = [1.0, 1.0, 3.0, 1.0, 3.0, 3.0, 1.0, 3.0];
    let r = parse(&hull_overlap_json(&a, &b).unwrap());
    assert!((num(&r, "area_a") - 4.0).abs() < 1e-12);
    assert!((num(&r, "area_overlap") - 1.0).abs() < 1e-12);
    assert!((num(&r, "recall") - 0.25).abs() < 1e-12);
    assert!((num(&r, "f_measure") - 0.25).abs() < 1e-12);
    assert_eq!(r["overlap"].as_array().unwrap().len(), 4);
}

#[test]
fn disjoint_and_degenerate_sets() {
    let r = parse(&hull_overlap_json(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0], &[5.0, 5.0, 6.0, 5.0, 5.0, 6.0]).unwrap());
    assert_eq!(num(&r, "area_overlap"), 0.0);
    assert_eq!(num(&r, "f_measure"), 0.0);
    let line = parse(&hull_overlap_json(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap());
    assert!(line["recall"].is_null());
}

#[test]
fn malformed_input_is_rejected() {
    assert!(hull_overlap_json(&[0.0, 0.0, 1.0], &[0.0, 0.0]).is_err());
    assert!(hull_overlap_json(&[f64::NAN, 0.0], &[0.0, 0.0]).is_err());
    assert!(measure_window_json(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0], 1, 1).is_err());
    assert!(measure_window_json(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 1.0, 1.0], 2, 2).is_err());
}

#[test]
fn identical_traces_give_full_coverage() {
    let xs = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.3, 0.6];
    let r = parse(&measure_window_json(&xs, &xs, 1, 5).unwrap());
    for key in ["scrr", "scpr", "scfm"] {
        assert_eq!(num(&r, key), 1.0, "{key}");
    }
    assert_eq!(num(&r, "icio"), 0.0);
    assert_eq!(r["cih"], Value::Bool(true));
    assert_eq!(r["degenerate"], Value::Bool(false));
}

#[test]
fn blobs_are_seeded() {
    assert_eq!(blobs(5, 3, 9), blobs(5, 3, 9));
    assert_ne!(blobs(5, 3, 9).0, blobs(5, 3, 10).0);
    let (rows, labels) = blobs(4, 2, 1);
    assert_eq!(rows.len(), 12);
    assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 4);
}

#[test]
fn tsne_separates_blobs() {
    let r = parse(&tsne_blobs_json(30, 10, 15.0, 500, 1).unwrap());
    assert_eq!(r["points"].as_array().unwrap().len(), 90);
    assert!(num(&r, "neighbour_purity") > 0.95, "{}", r["neighbour_purity"]);
    assert_eq!(tsne_blobs_json(30, 10, 15.0, 500, 1).unwrap(), tsne_blobs_json(30, 10, 15.0, 500, 1).unwrap());
}

#[test]
fn tsne_rejects_bad_sizes() {
    assert!(tsne_blobs_json(0, 10, 15.0, 500, 1).is_err());
    assert!(tsne_blobs_json(MAX_BLOB_POINTS, 10, 15.0, 500, 1).is_err());
    assert!(tsne_blobs_json(10, 0, 15.0, 500, 1).is_err());
    assert!(tsne_blobs_json(10, 3, 15.0, 10, 1).is_err());
}
