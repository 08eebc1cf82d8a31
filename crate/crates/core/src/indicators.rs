//! Coverage, central-idea offset and hit-ratio indicators over reduced traces.
//!
//! Each window of an input trace `X` and its hidden trace `H` is measured by
//! the hulls `ME(Xw)` and `ME(Hw)`: their overlap (semantic coverage), the
//! distance between the input centroid and the last hidden point (explicit
//! offset) or the hidden centroid (implicit offset), and whether the last
//! hidden point lies inside `ME(Xw)` (hit). Per-length indicators average
//! those measurements over every window of every sequence.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{enumerate_windows_for, WindowSpec};
use crate::error::{Error, Result};
use crate::geometry::{
    contains_point_2d, convex_hull_2d, convex_intersection, hull_contains_raw, Point2D, CONTAINS_EPS,
};
use crate::rnn::HiddenTrace;

/// Reduced inputs and hiddens of one evaluation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrace {
    pub sequence_index: usize,
    pub x2d: Vec<Point2D>,
    pub h2d: Vec<Point2D>,
}

impl ReducedTrace {
    pub fn new(sequence_index: usize, x2d: Vec<Point2D>, h2d: Vec<Point2D>) -> Result<Self> {
        if x2d.len() != h2d.len() {
            return Err(Error::DimensionMismatch { expected: x2d.len(), found: h2d.len() });
        }
        if x2d.iter().chain(&h2d).any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("reduced trace {sequence_index}")));
        }
        Ok(Self { sequence_index, x2d, h2d })
    }

    /// Hiddens equal to inputs.
    pub fn identity(sequence_index: usize, x2d: Vec<Point2D>) -> Self {
        Self { sequence_index, h2d: x2d.clone(), x2d }
    }

    pub fn len(&self) -> usize {
        self.x2d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x2d.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeasurement {
    pub window: WindowSpec,
    /// Area fields are `None` for degenerate windows.
    pub sc_area: Option<f64>,
    pub me_x_area: Option<f64>,
    pub me_h_area: Option<f64>,
    pub ecio: f64,
    pub icio: f64,
    pub cih: bool,
    /// Full-dimension hit test, when the unreduced trace was supplied.
    pub cih_nd: Option<bool>,
    /// Either hull has zero area.
    pub degenerate: bool,
}

fn check_window(len: usize, window: &WindowSpec) -> Result<()> {
    if window.length == 0 || window.start == 0 || window.start + window.length - 1 > len {
        return Err(Error::Config(format!(
            "window start {} length {} does not fit a trace of length {len}",
            window.start, window.length
        )));
    }
    Ok(())
}

pub fn measure_window(trace: &ReducedTrace, window: &WindowSpec, eps: f64) -> Result<WindowMeasurement> {
    check_window(trace.len(), window)?;
    let xw = &trace.x2d[window.range()];
    let hw = &trace.h2d[window.range()];
    let h_last = trace.h2d[window.last()];
    let me_x = convex_hull_2d(xw)?;
    let me_h = convex_hull_2d(hw)?;
    let ax = me_x.area();
    let ah = me_h.area();
    let degenerate = me_x.is_degenerate() || me_h.is_degenerate() || ax == 0.0 || ah == 0.0;

    let ci_x = me_x.centroid().expect("non-empty window");
    let ci_h = me_h.centroid().expect("non-empty window");
    let (sc_area, me_x_area, me_h_area) = if degenerate {
        (None, None, None)
    } else {
        // the overlap lies inside both hulls; clamp rounding excess
        let sc = convex_intersection(&me_x, &me_h).area().min(ax).min(ah);
        (Some(sc), Some(ax), Some(ah))
    };
    Ok(WindowMeasurement {
        window: *window,
        sc_area,
        me_x_area,
        me_h_area,
        ecio: ci_x.distance(h_last),
        icio: ci_x.distance(ci_h),
        cih: contains_point_2d(&me_x, h_last, eps),
        cih_nd: None,
        degenerate,
    })
}

/// Whether the last unreduced hidden vector of the window lies in the hull of
/// the unreduced input window.
pub fn window_hit_nd(full: &HiddenTrace, window: &WindowSpec, eps: f64) -> Result<bool> {
    check_window(full.len(), window)?;
    let xs: Vec<&[f64]> = full.inputs[window.range()].iter().map(|v| v.as_slice()).collect();
    hull_contains_raw(&xs, &full.hiddens[window.last()], eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Indicator {
    Scrr,
    Scpr,
    Scfm,
    Ecior,
    Icior,
    Cihr,
    CihrNd,
}

impl Indicator {
    /// The six reduced-space indicators in table order.
    pub const SIX: [Indicator; 6] =
        [Indicator::Scrr, Indicator::Scpr, Indicator::Scfm, Indicator::Ecior, Indicator::Icior, Indicator::Cihr];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Scrr => "SCRR",
            Indicator::Scpr => "SCPR",
            Indicator::Scfm => "SCFM",
            Indicator::Ecior => "ECIOR",
            Indicator::Icior => "ICIOR",
            Indicator::Cihr => "CIHR",
            Indicator::CihrNd => "CIHR-ND",
        }
    }

    /// Offsets are better when small.
    pub fn lower_is_better(self) -> bool {
        matches!(self, Indicator::Ecior | Indicator::Icior)
    }

    fn is_area(self) -> bool {
        matches!(self, Indicator::Scrr | Indicator::Scpr | Indicator::Scfm)
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Indicator::SIX.as_slice(), &[Indicator::CihrNd]]
            .concat()
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown indicator {s:?}")))
    }
}

/// Population over which ECIO and ICIO maxima are taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Maximum over the windows of the same length.
    #[default]
    PerLength,
    /// Maximum over all windows of every length.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRow {
    pub cell: String,
    pub indicator: Indicator,
    pub w: usize,
    /// `None` when no window qualifies (area indicators at `W <= 2`).
    pub value: Option<f64>,
    pub count: usize,
    pub degenerate_excluded: usize,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean of values in `[0, 1]`, kept in range despite rounding.
fn unit_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    mean(values).map(|m| m.clamp(0.0, 1.0))
}

fn max_offsets<'a>(ms: impl Iterator<Item = &'a WindowMeasurement>) -> (f64, f64) {
    ms.fold((0.0f64, 0.0f64), |(e, i), m| (e.max(m.ecio), i.max(m.icio)))
}

/// Indicator rows for one window length. `offset_max` overrides the
/// `(ecio, icio)` normalisers; by default they are the maxima over `measurements`.
pub fn aggregate(
    measurements: &[WindowMeasurement],
    cell: &str,
    w: usize,
    offset_max: Option<(f64, f64)>,
) -> Result<Vec<IndicatorRow>> {
    if measurements.is_empty() {
        return Err(Error::NoMeasurements);
    }
    let total = measurements.len();
    let valid: Vec<&WindowMeasurement> = measurements.iter().filter(|m| !m.degenerate).collect();
    let excluded = total - valid.len();

    let recall = unit_mean(valid.iter().map(|m| ratio(m.sc_area.unwrap_or(0.0), m.me_x_area.unwrap_or(0.0))));
    let precision = unit_mean(valid.iter().map(|m| ratio(m.sc_area.unwrap_or(0.0), m.me_h_area.unwrap_or(0.0))));
    let fmeasure = recall.zip(precision).map(|(r, p)| harmonic(r, p));
    let (ecio_max, icio_max) = offset_max.unwrap_or_else(|| max_offsets(measurements.iter()));
    let ecior = mean(measurements.iter().map(|m| m.ecio)).map(|e| ratio(e, ecio_max));
    let icior = mean(measurements.iter().map(|m| m.icio)).map(|i| ratio(i, icio_max));
    let cihr = mean(measurements.iter().map(|m| if m.cih { 1.0 } else { 0.0 }));

    let row = |indicator: Indicator, value: Option<f64>| {
        let (count, degenerate_excluded) = if indicator.is_area() { (valid.len(), excluded) } else { (total, 0) };
        IndicatorRow { cell: cell.to_string(), indicator, w, value, count, degenerate_excluded }
    };
    let mut rows = vec![
        row(Indicator::Scrr, recall),
        row(Indicator::Scpr, precision),
        row(Indicator::Scfm, fmeasure),
        row(Indicator::Ecior, ecior),
        row(Indicator::Icior, icior),
        row(Indicator::Cihr, cihr),
    ];
    if measurements.iter().all(|m| m.cih_nd.is_some()) {
        let nd = mean(measurements.iter().map(|m| if m.cih_nd == Some(true) { 1.0 } else { 0.0 }));
        rows.push(row(Indicator::CihrNd, nd));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: f64,
    pub normalization: Normalization,
    /// Restrict emitted rows to these indicators; empty keeps all.
    pub indicators: Vec<Indicator>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { eps: CONTAINS_EPS, normalization: Normalization::PerLength, indicators: Vec::new() }
    }
}

/// Every window of every trace for each length in `lengths`.
pub fn measure_all(
    traces: &[ReducedTrace],
    full: Option<&[HiddenTrace]>,
    lengths: &[usize],
    eps: f64,
) -> Result<Vec<WindowMeasurement>> {
    if let Some(full) = full {
        if full.len() != traces.len() {
            return Err(Error::DimensionMismatch { expected: traces.len(), found: full.len() });
        }
    }
    let mut out = Vec::new();
    for &w in lengths {
        for (k, trace) in traces.iter().enumerate() {
            for window in enumerate_windows_for(trace.sequence_index, trace.len(), w) {
                let mut m = measure_window(trace, &window, eps)?;
                if let Some(full) = full {
                    m.cih_nd = Some(window_hit_nd(&full[k], &window, eps)?);
                }
                out.push(m);
            }
        }
    }
    Ok(out)
}

/// Aggregates persisted or fresh measurements into a table, one block of rows
/// per window length in `lengths`.
pub fn table_from_measurements(
    measurements: &[WindowMeasurement],
    cell: &str,
    lengths: &[usize],
    config: &SweepConfig,
) -> Result<IndicatorTable> {
    if measurements.is_empty() {
        return Err(Error::NoMeasurements);
    }
    let global = match config.normalization {
        Normalization::Global => Some(max_offsets(measurements.iter())),
        Normalization::PerLength => None,
    };
    let mut rows = Vec::new();
    for &w in lengths {
        let at_w: Vec<WindowMeasurement> = measurements.iter().filter(|m| m.window.length == w).cloned().collect();
        for row in aggregate(&at_w, cell, w, global)? {
            if config.indicators.is_empty() || config.indicators.contains(&row.indicator) {
                rows.push(row);
            }
        }
    }
    Ok(IndicatorTable { rows })
}

/// Indicator table of one model over window lengths `lengths`.
pub fn sweep(
    traces: &[ReducedTrace],
    full: Option<&[HiddenTrace]>,
    cell: &str,
    lengths: &[usize],
    config: &SweepConfig,
) -> Result<IndicatorTable> {
    if let Some(t) = traces.iter().find(|t| t.len() != traces[0].len()) {
        return Err(Error::DimensionMismatch { expected: traces[0].len(), found: t.len() });
    }
    let ms = measure_all(traces, full, lengths, config.eps)?;
    table_from_measurements(&ms, cell, lengths, config)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorTable {
    pub rows: Vec<IndicatorRow>,
}

pub const TABLE_HEADER: &str = "cell,indicator,W,value,count,degenerate_excluded";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

impl IndicatorTable {
    pub fn get(&self, cell: &str, indicator: Indicator, w: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.cell == cell && r.indicator == indicator && r.w == w).and_then(|r| r.value)
    }

    /// `(W, value)` pairs of one series in row order.
    pub fn series(&self, cell: &str, indicator: Indicator) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.cell == cell && r.indicator == indicator)
            .filter_map(|r| r.value.map(|v| (r.w, v)))
            .collect()
    }

    pub fn cells(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.cell) {
                out.push(r.cell.clone());
            }
        }
        out
    }

    pub fn extend(&mut self, other: IndicatorTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{TABLE_HEADER}\n");
        for r in &self.rows {
            let value = r.value.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.cell, r.indicator, r.w, value, r.count, r.degenerate_excluded
            ));
        }
        s
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l) != Some(TABLE_HEADER) {
            return Err(parse_err(path, 1, format!("expected header {TABLE_HEADER}")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(parse_err(path, i + 1, "expected six fields"));
            }
            let bad = |what: &str| parse_err(path, i + 1, format!("bad {what}"));
            rows.push(IndicatorRow {
                cell: f[0].to_string(),
                indicator: f[1].parse().map_err(|_| bad("indicator"))?,
                w: f[2].parse().map_err(|_| bad("W"))?,
                value: if f[3].is_empty() { None } else { Some(f[3].parse().map_err(|_| bad("value"))?) },
                count: f[4].parse().map_err(|_| bad("count"))?,
                degenerate_excluded: f[5].parse().map_err(|_| bad("degenerate_excluded"))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    /// Checks that every value lies in `[0, 1]` and that SCFM is the harmonic
    /// mean of SCRR and SCPR wherever all three are present.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for r in &self.rows {
            if let Some(v) = r.value {
                if !(0.0..=1.0).contains(&v) {
                    problems.push(format!("{} {} W={}: value {v} outside [0, 1]", r.cell, r.indicator, r.w));
                }
            }
            if r.indicator == Indicator::Scfm {
                let rr = self.get(&r.cell, Indicator::Scrr, r.w);
                let pr = self.get(&r.cell, Indicator::Scpr, r.w);
                if let (Some(f), Some(a), Some(b)) = (r.value, rr, pr) {
                    if (f - harmonic(a, b)).abs() > 1e-9 {
                        problems
                            .push(format!("{} W={}: SCFM {f} is not the harmonic mean of {a} and {b}", r.cell, r.w));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

pub const MEASUREMENT_HEADER: &str =
    "sequence,start,length,sc_area,me_x_area,me_h_area,ecio,icio,cih,cih_nd,degenerate";

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn measurements_to_csv(ms: &[WindowMeasurement]) -> String {
    let mut s = format!("{MEASUREMENT_HEADER}\n");
    for m in ms {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            m.window.sequence_index,
            m.window.start,
            m.window.length,
            opt_f64(m.sc_area),
            opt_f64(m.me_x_area),
            opt_f64(m.me_h_area),
            m.ecio,
            m.icio,
            flag(m.cih),
            m.cih_nd.map(flag).unwrap_or(""),
            flag(m.degenerate),
        ));
    }
    s
}

pub fn parse_measurements(text: &str, path: &Path) -> Result<Vec<WindowMeasurement>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(MEASUREMENT_HEADER) {
        return Err(parse_err(path, 1, format!("expected header {MEASUREMENT_HEADER}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(parse_err(path, i + 1, "expected eleven fields"));
        }
        let bad = |what: &str| parse_err(path, i + 1, format!("bad {what}"));
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad(MEASUREMENT_HEADER.split(',').nth(k).unwrap()));
        let opt = |k: usize| if f[k].is_empty() { Ok(None) } else { num(k).map(Some) };
        let bit = |k: usize| match f[k] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad("flag")),
        };
        out.push(WindowMeasurement {
            window: WindowSpec {
                sequence_index: f[0].parse().map_err(|_| bad("sequence"))?,
                start: f[1].parse().map_err(|_| bad("start"))?,
                length: f[2].parse().map_err(|_| bad("length"))?,
            },
            sc_area: opt(3)?,
            me_x_area: opt(4)?,
            me_h_area: opt(5)?,
            ecio: num(6)?,
            icio: num(7)?,
            cih: bit(8)?,
            cih_nd: if f[9].is_empty() { None } else { Some(bit(9)?) },
            degenerate: bit(10)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_trace(rng: &mut ChaCha8Rng, idx: usize, t: usize) -> ReducedTrace {
        let mut pt = || Point2D::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let x: Vec<Point2D> = (0..t).map(|_| pt()).collect();
        let h: Vec<Point2D> = (0..t).map(|_| pt()).collect();
        ReducedTrace::new(idx, x, h).unwrap()
    }

    fn window(start: usize, length: usize) -> WindowSpec {
        WindowSpec { sequence_index: 0, start, length }
    }

    fn inside(poly: &[Point2D], p: Point2D) -> bool {
        (0..poly.len()).all(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % poly.len()];
            b.sub(a).cross(p.sub(a)) >= 0.0
        })
    }

    fn measurement(sc: f64, mx: f64, mh: f64, ecio: f64, icio: f64, cih: bool) -> WindowMeasurement {
        WindowMeasurement {
            window: window(1, 3),
            sc_area: Some(sc),
            me_x_area: Some(mx),
            me_h_area: Some(mh),
            ecio,
            icio,
            cih,
            cih_nd: None,
            degenerate: false,
        }
    }

    #[test]
    fn identity_window_is_ideal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_trace(&mut rng, 0, 8).x2d;
        let m = measure_window(&ReducedTrace::identity(0, x), &window(2, 6), 1e-9).unwrap();
        assert_eq!(m.sc_area, m.me_x_area);
        assert_eq!(m.sc_area, m.me_h_area);
        assert_eq!(m.icio, 0.0);
        assert!(m.cih);
    }

    #[test]
    fn translated_window_has_no_overlap() {
        let x = vec![Point2D::new(0.0, 0.0), Point2D::new(1.0, 0.0), Point2D::new(0.0, 1.0), Point2D::new(0.8, 0.9)];
        let h: Vec<Point2D> = x.iter().map(|p| p.add(Point2D::new(10.0, 10.0))).collect();
        let m = measure_window(&ReducedTrace::new(0, x, h).unwrap(), &window(1, 4), 1e-9).unwrap();
        assert_eq!(m.sc_area, Some(0.0));
        assert!((m.icio - 10.0 * 2f64.sqrt()).abs() < 1e-9);
        assert!(!m.cih);
    }

    #[test]
    fn overlap_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let trace = random_trace(&mut rng, 0, 6);
            let m = measure_window(&trace, &window(1, 6), 1e-9).unwrap();
            let hx = convex_hull_2d(&trace.x2d).unwrap();
            let hh = convex_hull_2d(&trace.h2d).unwrap();
            let samples = 1_000_000;
            let hits = (0..samples)
                .filter(|_| {
                    let p = Point2D::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                    inside(hx.vertices(), p) && inside(hh.vertices(), p)
                })
                .count();
            let estimate = 100.0 * hits as f64 / samples as f64;
            let sc = m.sc_area.unwrap();
            // 1% of the input-hull area, well above the sampling error
            assert!((sc - estimate).abs() <= 0.01 * m.me_x_area.unwrap(), "sc {sc} vs {estimate}");
        }
    }

    #[test]
    fn short_windows_are_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trace = random_trace(&mut rng, 0, 5);
        for w in 1..=2 {
            let m = measure_window(&trace, &window(1, w), 1e-9).unwrap();
            assert!(m.degenerate && m.sc_area.is_none() && m.me_x_area.is_none());
        }
        let m = measure_window(&trace, &window(1, 2), 1e-9).unwrap();
        let mid = trace.x2d[0].add(trace.x2d[1]).scale(0.5);
        assert!((m.ecio - mid.distance(trace.h2d[1])).abs() < 1e-12);
    }

    #[test]
    fn window_must_fit_the_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trace = random_trace(&mut rng, 0, 5);
        assert!(measure_window(&trace, &window(3, 4), 1e-9).is_err());
        assert!(measure_window(&trace, &window(0, 2), 1e-9).is_err());
    }

    #[test]
    fn hand_built_recall() {
        let ms = vec![
            measurement(0.2, 1.0, 0.5, 1.0, 2.0, true),
            measurement(0.8, 2.0, 1.6, 2.0, 2.0, false),
            measurement(1.8, 3.0, 2.0, 3.0, 2.0, true),
        ];
        let rows = aggregate(&ms, "lstm", 3, None).unwrap();
        let value = |i: Indicator| rows.iter().find(|r| r.indicator == i).unwrap().value.unwrap();
        assert!((value(Indicator::Scrr) - 0.4).abs() < 1e-12);
        assert!((value(Indicator::Scpr) - (0.4 + 0.5 + 0.9) / 3.0).abs() < 1e-12);
        assert!((value(Indicator::Ecior) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(value(Indicator::Icior), 1.0);
        assert!((value(Indicator::Cihr) - 2.0 / 3.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.count == 3 && r.degenerate_excluded == 0));
    }

    #[test]
    fn single_window_offsets_normalise_to_one() {
        let rows = aggregate(&[measurement(0.1, 1.0, 1.0, 0.3, 0.7, false)], "gru", 3, None).unwrap();
        assert!(rows
            .iter()
            .filter(|r| matches!(r.indicator, Indicator::Ecior | Indicator::Icior))
            .all(|r| r.value == Some(1.0)));
        let rows = aggregate(&[measurement(0.1, 1.0, 1.0, 0.0, 0.0, false)], "gru", 3, None).unwrap();
        assert!(rows
            .iter()
            .filter(|r| matches!(r.indicator, Indicator::Ecior | Indicator::Icior))
            .all(|r| r.value == Some(0.0)));
    }

    #[test]
    fn no_measurements_is_an_error() {
        assert!(matches!(aggregate(&[], "vrnn", 3, None), Err(Error::NoMeasurements)));
    }

    #[test]
    fn identity_sweep_is_flat_and_ideal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traces: Vec<ReducedTrace> =
            (0..4).map(|i| ReducedTrace::identity(i, random_trace(&mut rng, i, 35).x2d)).collect();
        let lengths: Vec<usize> = (1..=35).collect();
        let table = sweep(&traces, None, "id", &lengths, &SweepConfig::default()).unwrap();
        assert_eq!(table.rows.len(), 210);
        for w in 3..=35 {
            for i in [Indicator::Scrr, Indicator::Scpr, Indicator::Scfm, Indicator::Cihr] {
                assert_eq!(table.get("id", i, w), Some(1.0), "{i} at {w}");
            }
            assert_eq!(table.get("id", Indicator::Icior, w), Some(0.0));
        }
        let scrr1 = table.rows.iter().find(|r| r.indicator == Indicator::Scrr && r.w == 1).unwrap();
        assert_eq!((scrr1.value, scrr1.count, scrr1.degenerate_excluded), (None, 0, 4 * 35));
        table.validate().unwrap();
    }

    #[test]
    fn rigid_translation_gives_unit_icior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shift = Point2D::new(3.0, -4.0);
        let traces: Vec<ReducedTrace> = (0..3)
            .map(|i| {
                let x = random_trace(&mut rng, i, 12).x2d;
                let h = x.iter().map(|p| p.add(shift)).collect();
                ReducedTrace::new(i, x, h).unwrap()
            })
            .collect();
        let lengths: Vec<usize> = (3..=12).collect();
        let ms = measure_all(&traces, None, &lengths, 1e-9).unwrap();
        assert!(ms.iter().all(|m| (m.icio - 5.0).abs() < 1e-9));
        let table = table_from_measurements(&ms, "t", &lengths, &SweepConfig::default()).unwrap();
        for w in lengths {
            assert!((table.get("t", Indicator::Icior, w).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn global_normalisation_uses_the_overall_maximum() {
        let mut a = measurement(0.5, 1.0, 1.0, 1.0, 1.0, true);
        let mut b = a.clone();
        b.window.length = 4;
        b.ecio = 4.0;
        b.icio = 2.0;
        a.window.length = 3;
        let ms = vec![a, b];
        let cfg = SweepConfig { normalization: Normalization::Global, ..Default::default() };
        let t = table_from_measurements(&ms, "c", &[3, 4], &cfg).unwrap();
        assert_eq!(t.get("c", Indicator::Ecior, 3), Some(0.25));
        assert_eq!(t.get("c", Indicator::Icior, 3), Some(0.5));
        assert_eq!(t.get("c", Indicator::Ecior, 4), Some(1.0));
        let per = table_from_measurements(&ms, "c", &[3, 4], &SweepConfig::default()).unwrap();
        assert_eq!(per.get("c", Indicator::Ecior, 3), Some(1.0));
    }

    #[test]
    fn persisted_measurements_reproduce_the_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let traces: Vec<ReducedTrace> = (0..3).map(|i| random_trace(&mut rng, i, 10)).collect();
        let lengths: Vec<usize> = (1..=10).collect();
        let cfg = SweepConfig::default();
        let ms = measure_all(&traces, None, &lengths, cfg.eps).unwrap();
        let back = parse_measurements(&measurements_to_csv(&ms), Path::new("m.csv")).unwrap();
        assert_eq!(back, ms);
        let fresh = sweep(&traces, None, "vrnn", &lengths, &cfg).unwrap();
        let again = table_from_measurements(&back, "vrnn", &lengths, &cfg).unwrap();
        assert_eq!(fresh.to_csv(), again.to_csv());
        let parsed = IndicatorTable::parse_csv(&fresh.to_csv(), Path::new("t.csv")).unwrap();
        assert_eq!(parsed, fresh);
    }

    #[test]
    fn full_dimension_hits_add_a_row() {
        let traces = vec![ReducedTrace::identity(
            0,
            vec![Point2D::new(0.0, 0.0), Point2D::new(1.0, 0.0), Point2D::new(0.0, 1.0), Point2D::new(0.2, 0.2)],
        )];
        let full = vec![HiddenTrace {
            tokens: vec![0; 4],
            inputs: vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.2, 0.2, 0.0]],
            hiddens: vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.2, 0.2, 0.5]],
        }];
        let t = sweep(&traces, Some(&full), "c", &[3, 4], &SweepConfig::default()).unwrap();
        assert_eq!(t.get("c", Indicator::CihrNd, 3), Some(0.5));
        assert_eq!(t.get("c", Indicator::CihrNd, 4), Some(0.0));
        assert_eq!(t.get("c", Indicator::Cihr, 4), Some(1.0));
    }

    #[test]
    fn indicator_filter_and_names() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let traces = vec![random_trace(&mut rng, 0, 6)];
        let cfg = SweepConfig { indicators: vec![Indicator::Scrr, Indicator::Cihr], ..Default::default() };
        let t = sweep(&traces, None, "c", &[3, 4], &cfg).unwrap();
        assert_eq!(t.rows.len(), 4);
        for i in Indicator::SIX {
            assert_eq!(i.name().parse::<Indicator>().unwrap(), i);
        }
        assert_eq!("cihr-nd".parse::<Indicator>().unwrap(), Indicator::CihrNd);
    }

    #[test]
    fn validate_flags_bad_rows() {
        let mut t = IndicatorTable::default();
        let row = |indicator, value| IndicatorRow {
            cell: "c".into(),
            indicator,
            w: 3,
            value: Some(value),
            count: 1,
            degenerate_excluded: 0,
        };
        t.rows = vec![
            row(Indicator::Scrr, 0.5),
            row(Indicator::Scpr, 0.25),
            row(Indicator::Scfm, 0.4),
            row(Indicator::Cihr, 1.5),
        ];
        assert_eq!(t.validate().unwrap_err().len(), 2);
    }

    proptest! {
        #[test]
        fn every_window_respects_coverage_bounds(seed in 0u64..500, t in 3usize..14) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trace = random_trace(&mut rng, 0, t);
            let w = rng.random_range(1..=t);
            let start = rng.random_range(1..=t - w + 1);
            let m = measure_window(&trace, &window(start, w), 1e-9).unwrap();
            if let (Some(sc), Some(mx), Some(mh)) = (m.sc_area, m.me_x_area, m.me_h_area) {
                prop_assert!(sc >= 0.0 && sc <= mx.min(mh));
            }
            prop_assert!(m.ecio >= 0.0 && m.icio >= 0.0);
        }

        #[test]
        fn tables_stay_in_range(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traces: Vec<ReducedTrace> = (0..3).map(|i| random_trace(&mut rng, i, 8)).collect();
            let lengths: Vec<usize> = (1..=8).collect();
            let t = sweep(&traces, None, "c", &lengths, &SweepConfig::default()).unwrap();
            prop_assert!(t.validate().is_ok());
        }
    }
}
