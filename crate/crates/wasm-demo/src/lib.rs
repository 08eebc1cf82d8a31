//! Browser bindings for three memscope operations. Each `*_json` function is
//! plain Rust returning a JSON document, so it can be tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use memscope::corpus::WindowSpec;
use memscope::geometry::{convex_hull_2d, convex_intersection, ConvexPolygon2D, Point2D, CONTAINS_EPS};
use memscope::indicators::{measure_window, ReducedTrace};
use memscope::reduction::{tsne_rows, ReductionConfig, ReductionMethod};

/// Largest blob size the t-SNE demo accepts; exact t-SNE is quadratic.
pub const MAX_BLOB_POINTS: usize = 150;

#[derive(Serialize)]
struct Overlap {
    hull_a: Vec<Point2D>,
    hull_b: Vec<Point2D>,
    overlap: Vec<Point2D>,
    area_a: f64,
    area_b: f64,
    area_overlap: f64,
    centroid_a: Option<Point2D>,
    centroid_b: Option<Point2D>,
    /// Overlap over the area of `a`, `b`, and their harmonic mean.
    recall: Option<f64>,
    precision: Option<f64>,
    f_measure: Option<f64>,
}

#[derive(Serialize)]
struct Window {
    hull_x: Vec<Point2D>,
    hull_h: Vec<Point2D>,
    overlap: Vec<Point2D>,
    ci_x: Option<Point2D>,
    ci_h: Option<Point2D>,
    h_last: Point2D,
    degenerate: bool,
    scrr: Option<f64>,
    scpr: Option<f64>,
    scfm: Option<f64>,
    ecio: f64,
    icio: f64,
    cih: bool,
}

#[derive(Serialize)]
struct Embedding {
    points: Vec<Point2D>,
    labels: Vec<usize>,
    /// Share of points whose nearest 2-D neighbour has the same label.
    neighbour_purity: f64,
}

fn points(flat: &[f64]) -> Result<Vec<Point2D>, String> {
    if !flat.len().is_multiple_of(2) {
        return Err(format!("expected x,y pairs, got {} numbers", flat.len()));
    }
    let pts: Vec<Point2D> = flat.chunks_exact(2).map(|c| Point2D::new(c[0], c[1])).collect();
    if pts.iter().any(|p| !p.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok(pts)
}

fn hull(pts: &[Point2D]) -> Result<ConvexPolygon2D, String> {
    convex_hull_2d(pts).map_err(|e| e.to_string())
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| (num / den).clamp(0.0, 1.0))
}

fn harmonic(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if a + b > 0.0 => Some(2.0 * a * b / (a + b)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Hulls of two flat `x,y` point lists and their overlap.
pub fn hull_overlap_json(a: &[f64], b: &[f64]) -> Result<String, String> {
    let ha = hull(&points(a)?)?;
    let hb = hull(&points(b)?)?;
    let sc = convex_intersection(&ha, &hb);
    let (area_a, area_b) = (ha.area(), hb.area());
    let area_overlap = sc.area().min(area_a).min(area_b);
    let recall = ratio(area_overlap, area_a);
    let precision = ratio(area_overlap, area_b);
    to_json(&Overlap {
        hull_a: ha.vertices().to_vec(),
        hull_b: hb.vertices().to_vec(),
        overlap: sc.vertices().to_vec(),
        area_a,
        area_b,
        area_overlap,
        centroid_a: ha.centroid(),
        centroid_b: hb.centroid(),
        recall,
        precision,
        f_measure: harmonic(recall, precision),
    })
}

/// Indicators of one window of a reduced trace; `start` is one-based.
pub fn measure_window_json(xs: &[f64], hs: &[f64], start: usize, length: usize) -> Result<String, String> {
    let trace = ReducedTrace::new(0, points(xs)?, points(hs)?).map_err(|e| e.to_string())?;
    let window = WindowSpec { sequence_index: 0, start, length };
    let m = measure_window(&trace, &window, CONTAINS_EPS).map_err(|e| e.to_string())?;
    let range = window.range();
    let hx = hull(&trace.x2d[range.clone()])?;
    let hh = hull(&trace.h2d[range])?;
    let scrr = m.sc_area.zip(m.me_x_area).and_then(|(s, a)| ratio(s, a));
    let scpr = m.sc_area.zip(m.me_h_area).and_then(|(s, a)| ratio(s, a));
    to_json(&Window {
        overlap: convex_intersection(&hx, &hh).vertices().to_vec(),
        hull_x: hx.vertices().to_vec(),
        hull_h: hh.vertices().to_vec(),
        ci_x: hx.centroid(),
        ci_h: hh.centroid(),
        h_last: trace.h2d[window.last()],
        degenerate: m.degenerate,
        scrr,
        scpr,
        scfm: harmonic(scrr, scpr),
        ecio: m.ecio,
        icio: m.icio,
        cih: m.cih,
    })
}

/// Three Gaussian blobs in `dim` dimensions with centres drawn from `[-10, 10]`.
pub fn blobs(per_blob: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = Uniform::new(-10.0, 10.0).expect("valid range");
    let noise = Normal::new(0.0, 1.0).expect("valid sd");
    let mut rows = Vec::with_capacity(3 * per_blob);
    let mut labels = Vec::with_capacity(3 * per_blob);
    for label in 0..3 {
        let c: Vec<f64> = (0..dim).map(|_| centre.sample(&mut rng)).collect();
        for _ in 0..per_blob {
            rows.push(c.iter().map(|v| v + noise.sample(&mut rng)).collect());
            labels.push(label);
        }
    }
    (rows, labels)
}

fn neighbour_purity(points: &[Point2D], labels: &[usize]) -> f64 {
    let agree = (0..points.len())
        .filter(|&i| {
            (0..points.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| points[i].distance(points[a]).total_cmp(&points[i].distance(points[b])))
                .is_some_and(|j| labels[j] == labels[i])
        })
        .count();
    agree as f64 / points.len() as f64
}

/// t-SNE layout of a seeded three-blob set.
pub fn tsne_blobs_json(
    per_blob: usize,
    dim: usize,
    perplexity: f64,
    iterations: usize,
    seed: u64,
) -> Result<String, String> {
    if per_blob == 0 || 3 * per_blob > MAX_BLOB_POINTS {
        return Err(format!("total points must be between 3 and {MAX_BLOB_POINTS}"));
    }
    if dim == 0 {
        return Err("dimension must be positive".into());
    }
    let (rows, labels) = blobs(per_blob, dim, seed);
    let cfg =
        ReductionConfig { method: ReductionMethod::Tsne, perplexity, iterations, seed, ..ReductionConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let points = tsne_rows(&refs, &cfg).map_err(|e| e.to_string())?;
    let neighbour_purity = neighbour_purity(&points, &labels);
    to_json(&Embedding { points, labels, neighbour_purity })
}

#[wasm_bindgen]
pub fn hull_overlap(a: &[f64], b: &[f64]) -> Result<String, JsValue> {
    hull_overlap_json(a, b).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn measure_window_demo(xs: &[f64], hs: &[f64], start: usize, length: usize) -> Result<String, JsValue> {
    measure_window_json(xs, hs, start, length).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn tsne_blobs(
    per_blob: usize,
    dim: usize,
    perplexity: f64,
    iterations: usize,
    seed: u32,
) -> Result<String, JsValue> {
    tsne_blobs_json(per_blob, dim, perplexity, iterations, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
