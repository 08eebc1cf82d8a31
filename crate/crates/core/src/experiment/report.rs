//! Radar summaries, BPTT tables, SVG figures and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::indicators::{Indicator, IndicatorTable};

#[derive(Debug, Clone, PartialEq)]
pub struct RadarRow {
    pub cell: String,
    pub indicator: Indicator,
    /// Best value over window lengths; `1 - min` for offsets.
    pub value: f64,
    /// Window length at which it is attained.
    pub w: usize,
}

pub const RADAR_HEADER: &str = "cell,indicator,value,W";

/// Per cell and indicator: the maximum over W, or `1 - min` over W for ECIOR
/// and ICIOR, so larger is better on every axis.
pub fn radar_summary(table: &IndicatorTable) -> Result<Vec<RadarRow>> {
    if table.rows.is_empty() {
        return Err(Error::NoMeasurements);
    }
    let mut out = Vec::new();
    for cell in table.cells() {
        for indicator in Indicator::SIX {
            let series = table.series(&cell, indicator);
            let best = if indicator.lower_is_better() {
                series.iter().copied().reduce(|a, b| if b.1 < a.1 { b } else { a }).map(|(w, v)| (w, 1.0 - v))
            } else {
                series.iter().copied().reduce(|a, b| if b.1 > a.1 { b } else { a })
            };
            if let Some((w, value)) = best {
                out.push(RadarRow { cell: cell.clone(), indicator, value, w });
            }
        }
    }
    Ok(out)
}

pub fn radar_to_csv(rows: &[RadarRow]) -> String {
    let mut s = format!("{RADAR_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.cell, r.indicator, r.value, r.w);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpttRow {
    pub cell: String,
    pub bptt: usize,
    pub valid_ppl: f64,
    pub test_ppl: f64,
}

pub const BPTT_HEADER: &str = "cell,bptt,valid_ppl,test_ppl";

pub fn bptt_to_csv(rows: &[BpttRow]) -> String {
    let mut s = format!("{BPTT_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.cell, r.bptt, r.valid_ppl, r.test_ppl);
    }
    s
}

pub fn parse_bptt(text: &str, path: &Path) -> Result<Vec<BpttRow>> {
    let err = |line: usize, msg: &str| Error::Parse { path: path.to_path_buf(), line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(BPTT_HEADER) {
        return Err(err(1, "expected BPTT header"));
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err(i + 1, "expected four fields"));
            }
            Ok(BpttRow {
                cell: f[0].to_string(),
                bptt: f[1].parse().map_err(|_| err(i + 1, "bad bptt"))?,
                valid_ppl: f[2].parse().map_err(|_| err(i + 1, "bad valid_ppl"))?,
                test_ppl: f[3].parse().map_err(|_| err(i + 1, "bad test_ppl"))?,
            })
        })
        .collect()
}

pub fn parse_radar(text: &str, path: &Path) -> Result<Vec<RadarRow>> {
    let err = |line: usize, msg: &str| Error::Parse { path: path.to_path_buf(), line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(RADAR_HEADER) {
        return Err(err(1, "expected radar header"));
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err(i + 1, "expected four fields"));
            }
            Ok(RadarRow {
                cell: f[0].to_string(),
                indicator: f[1].parse().map_err(|_| err(i + 1, "bad indicator"))?,
                value: f[2].parse().map_err(|_| err(i + 1, "bad value"))?,
                w: f[3].parse().map_err(|_| err(i + 1, "bad W"))?,
            })
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Panel {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn line_panel(svg: &mut String, p: &Panel, title: &str, x_label: &str, series: &[Series], y_range: Option<(f64, f64)>) {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (x0, x1) = nice_range(
        all.iter().map(|q| q.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = y_range.unwrap_or_else(|| {
        nice_range(
            all.iter().map(|q| q.1).fold(f64::INFINITY, f64::min),
            all.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max),
        )
    });
    let (left, right, top, bottom) = (p.x + 50.0, p.x + p.w - 10.0, p.y + 25.0, p.y + p.h - 35.0);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        p.y + 15.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    for k in 0..=4 {
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{fy:.3}</text>"#,
            left - 4.0,
            sy(fy) + 3.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{fx:.0}</text>"#,
            sx(fx),
            bottom + 13.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        bottom + 28.0,
        escape(x_label)
    );
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
        let ly = top + 12.0 + 13.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/>"#,
            right - 70.0,
            right - 55.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            right - 50.0,
            ly + 3.0,
            escape(s.name)
        );
    }
}

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Six panels of indicator value against window length, one line per cell.
pub fn indicator_svg(table: &IndicatorTable, dataset: &str) -> String {
    let (pw, ph) = (340.0, 240.0);
    let mut svg = svg_open(3.0 * pw, 2.0 * ph + 30.0);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" font-size="15" text-anchor="middle">{}</text>"#,
        1.5 * pw,
        escape(dataset)
    );
    let cells = table.cells();
    for (k, indicator) in Indicator::SIX.into_iter().enumerate() {
        let panel = Panel { x: (k % 3) as f64 * pw, y: 30.0 + (k / 3) as f64 * ph, w: pw, h: ph };
        let series: Vec<Series> = cells
            .iter()
            .enumerate()
            .map(|(c, cell)| Series {
                name: cell,
                color: PALETTE[c % PALETTE.len()],
                points: table.series(cell, indicator).into_iter().map(|(w, v)| (w as f64, v)).collect(),
            })
            .collect();
        line_panel(&mut svg, &panel, indicator.name(), "W", &series, Some((0.0, 1.0)));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Hexagonal radar chart, one polygon per cell.
pub fn radar_svg(rows: &[RadarRow]) -> String {
    let (w, h, cx, cy, r) = (520.0, 480.0, 260.0, 250.0, 170.0);
    let mut svg = svg_open(w, h);
    let axis = |k: usize, scale: f64| {
        let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 6.0;
        (cx + r * scale * a.cos(), cy + r * scale * a.sin())
    };
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let pts: Vec<String> = (0..6).map(|k| axis(k, ring)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(svg, r##"<polygon points="{}" fill="none" stroke="#ccc"/>"##, pts.join(" "));
    }
    for (k, ind) in Indicator::SIX.into_iter().enumerate() {
        let (x, y) = axis(k, 1.0);
        let (lx, ly) = axis(k, 1.15);
        let _ = writeln!(svg, r##"<line x1="{cx}" y1="{cy}" x2="{x:.2}" y2="{y:.2}" stroke="#999"/>"##);
        let label = if ind.lower_is_better() { format!("1-{}", ind.name()) } else { ind.name().to_string() };
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.2}" y="{:.2}" font-size="12" text-anchor="middle">{label}</text>"#,
            ly + 4.0
        );
    }
    let mut cells: Vec<&str> = Vec::new();
    for row in rows {
        if !cells.contains(&row.cell.as_str()) {
            cells.push(&row.cell);
        }
    }
    for (c, cell) in cells.iter().enumerate() {
        let color = PALETTE[c % PALETTE.len()];
        let pts: Vec<String> = Indicator::SIX
            .into_iter()
            .enumerate()
            .map(|(k, ind)| {
                let v = rows
                    .iter()
                    .find(|r| r.cell == *cell && r.indicator == ind)
                    .map_or(0.0, |r| r.value.clamp(0.0, 1.0));
                let (x, y) = axis(k, v);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let ly = 20.0 + 15.0 * c as f64;
        let _ = writeln!(svg, r#"<rect x="10" y="{:.1}" width="12" height="10" fill="{color}"/>"#, ly - 9.0);
        let _ = writeln!(svg, r#"<text x="28" y="{ly:.1}" font-size="12">{}</text>"#, escape(cell));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Validation and test perplexity against BPTT length.
pub fn bptt_svg(rows: &[BpttRow]) -> String {
    let (pw, ph) = (420.0, 300.0);
    let mut svg = svg_open(2.0 * pw, ph);
    let mut cells: Vec<&str> = Vec::new();
    for row in rows {
        if !cells.contains(&row.cell.as_str()) {
            cells.push(&row.cell);
        }
    }
    for (k, (title, pick)) in [("valid PPL", 0usize), ("test PPL", 1)].into_iter().enumerate() {
        let series: Vec<Series> = cells
            .iter()
            .enumerate()
            .map(|(c, cell)| Series {
                name: cell,
                color: PALETTE[c % PALETTE.len()],
                points: rows
                    .iter()
                    .filter(|r| r.cell == *cell)
                    .map(|r| (r.bptt as f64, if pick == 0 { r.valid_ppl } else { r.test_ppl }))
                    .collect(),
            })
            .collect();
        line_panel(&mut svg, &Panel { x: k as f64 * pw, y: 0.0, w: pw, h: ph }, title, "BPTT", &series, None);
    }
    svg.push_str("</svg>\n");
    svg
}

/// `key = value` lines in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Self {
        let entries =
            text.lines().filter_map(|l| l.split_once(" = ")).map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Self { entries }
    }
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
