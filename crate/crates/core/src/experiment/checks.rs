//! Qualitative checks over study outputs.

use super::report::BpttRow;
use crate::indicators::{Indicator, IndicatorTable};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks are reported but do not decide acceptance.
    pub required: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, required: true, detail: detail.into() }
    }

    fn informational(mut self) -> Self {
        self.required = false;
        self
    }
}

/// Value range and the SCFM harmonic identity over every row.
pub fn table_checks(table: &IndicatorTable) -> Vec<Check> {
    let nonempty = Check::new("table non-empty", !table.rows.is_empty(), format!("{} rows", table.rows.len()));
    let bounds = match table.validate() {
        Ok(()) => Check::new("bounds and harmonic identity", true, format!("{} rows checked", table.rows.len())),
        Err(p) => Check::new("bounds and harmonic identity", false, p.join("; ")),
    };
    vec![nonempty, bounds]
}

/// VRNN's SCPR below LSTM's and GRU's for every `W >= 5`; LSTM and GRU SCRR
/// changing by less than 10% between `W = 15` and `W = 35`.
pub fn ordering_checks(table: &IndicatorTable) -> Vec<Check> {
    let mut out = Vec::new();
    let vrnn = table.series("vrnn", Indicator::Scpr);
    let mut failures = Vec::new();
    let mut compared = 0;
    let mut max_vrnn = 0.0f64;
    for &(w, v) in vrnn.iter().filter(|(w, _)| *w >= 5) {
        max_vrnn = max_vrnn.max(v);
        for other in ["lstm", "gru"] {
            match table.get(other, Indicator::Scpr, w) {
                Some(o) if v < o => compared += 1,
                Some(o) => failures.push(format!("W={w}: vrnn {v:.4} >= {other} {o:.4}")),
                None => failures.push(format!("W={w}: no {other} SCPR")),
            }
        }
    }
    let passed = failures.is_empty() && compared > 0;
    let detail = if passed {
        format!("{compared} comparisons")
    } else if compared == 0 && failures.is_empty() {
        "no VRNN SCPR rows at W >= 5".into()
    } else {
        failures.join("; ")
    };
    out.push(Check::new("VRNN SCPR below LSTM and GRU for W >= 5", passed, detail));
    out.push(
        Check::new("VRNN SCPR below 1% for W >= 5", !vrnn.is_empty() && max_vrnn < 0.01, format!("max {max_vrnn:.4}"))
            .informational(),
    );
    for cell in ["lstm", "gru"] {
        let check = match (table.get(cell, Indicator::Scrr, 15), table.get(cell, Indicator::Scrr, 35)) {
            (Some(a), Some(b)) if a > 0.0 => {
                let rel = (b - a).abs() / a;
                Check::new(
                    format!("{cell} SCRR stable from W=15 to W=35"),
                    rel < 0.1,
                    format!("{a:.4} -> {b:.4} ({:.1}%)", 100.0 * rel),
                )
            }
            other => {
                Check::new(format!("{cell} SCRR stable from W=15 to W=35"), false, format!("missing values {other:?}"))
            }
        };
        out.push(check);
    }
    out
}

fn ppl_at(rows: &[BpttRow], cell: &str, bptt: usize) -> Option<f64> {
    rows.iter().find(|r| r.cell == cell && r.bptt == bptt).map(|r| r.valid_ppl)
}

fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean > 0.0).then(|| var.sqrt() / mean)
}

/// Gated cells gain most of their BPTT benefit by 15; VRNN fluctuates more
/// than LSTM. Both use validation perplexity.
pub fn bptt_checks(rows: &[BpttRow]) -> Vec<Check> {
    let mut out = Vec::new();
    for cell in ["lstm", "gru"] {
        let name = format!("{cell} PPL gain 5->15 exceeds twice the gain 15->35");
        let check = match (ppl_at(rows, cell, 5), ppl_at(rows, cell, 15), ppl_at(rows, cell, 35)) {
            (Some(a), Some(b), Some(c)) => {
                let early = a - b;
                let late = b - c;
                Check::new(name, early > 2.0 * late, format!("5->15: {early:.3}, 15->35: {late:.3}"))
            }
            _ => Check::new(name, false, "missing BPTT 5, 15 or 35"),
        };
        out.push(check);
    }
    let series = |cell: &str| -> Vec<f64> { rows.iter().filter(|r| r.cell == cell).map(|r| r.valid_ppl).collect() };
    let name = "VRNN PPL varies more across BPTT than LSTM";
    out.push(match (coefficient_of_variation(&series("vrnn")), coefficient_of_variation(&series("lstm"))) {
        (Some(v), Some(l)) => Check::new(name, v > l, format!("CV vrnn {v:.4}, lstm {l:.4}")),
        _ => Check::new(name, false, "need at least two BPTT values for vrnn and lstm"),
    });
    out
}
