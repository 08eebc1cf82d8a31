//! Individual stages of a memory study, each with its persisted artifact.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use crate::corpus::{segment, CorpusSplits, TokenSequence};
use crate::error::{Error, Result};
use crate::geometry::{Point2D, SemanticPoint};
use crate::indicators::{
    measure_all, table_from_measurements, Indicator, IndicatorTable, ReducedTrace, SweepConfig, WindowMeasurement,
};
use crate::reduction::{reduce, ReducedMap, ReductionConfig};
use crate::rnn::{forward_trace, train, CellKind, CellState, HiddenTrace, ModelParams, TrainLog};

pub fn train_stage(cfg: &ExperimentConfig, splits: &CorpusSplits, cell: CellKind) -> Result<(ModelParams, TrainLog)> {
    let model = cfg.model_config(cell, splits.vocab.len());
    train(&model, &cfg.train, &splits.train, &splits.valid).map_err(|e| e.in_stage(format!("train {cell}")))
}

/// The first `count` length-`len` segments of the validation stream.
pub fn evaluation_sequences(valid: &[usize], count: usize, len: usize) -> Result<Vec<TokenSequence>> {
    let mut seqs = segment(valid, len);
    if seqs.is_empty() {
        return Err(Error::Config(format!(
            "validation split has {} tokens, fewer than one sequence of {len}",
            valid.len()
        )));
    }
    seqs.truncate(count);
    Ok(seqs)
}

/// Traces of consecutive sequences, carrying state from one to the next.
/// With `identity`, every hidden vector is replaced by its input.
pub fn extract_traces(params: &ModelParams, seqs: &[TokenSequence], identity: bool) -> Result<Vec<HiddenTrace>> {
    let mut state = CellState::zeros(params.cell, params.dim());
    let mut out = Vec::with_capacity(seqs.len());
    for seq in seqs {
        let (mut trace, next) = forward_trace(params, seq, &state)?;
        if identity {
            trace.hiddens = trace.inputs.clone();
        }
        out.push(trace);
        state = next;
    }
    Ok(out)
}

/// Distinct vectors of a set of traces. Bit-identical vectors share one
/// point, named after their first occurrence (`x{seq}_{pos}` or `h{seq}_{pos}`).
#[derive(Debug, Clone, PartialEq)]
pub struct PointPool {
    pub points: Vec<Vec<f64>>,
    pub ids: Vec<String>,
    /// Pool index of every input vector, per trace.
    pub x_index: Vec<Vec<usize>>,
    pub h_index: Vec<Vec<usize>>,
}

impl PointPool {
    /// `offset` is added to the trace index when naming points.
    pub fn build(traces: &[HiddenTrace], offset: usize) -> Self {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut pool = PointPool { points: Vec::new(), ids: Vec::new(), x_index: Vec::new(), h_index: Vec::new() };
        let mut intern = |pool: &mut PointPool, v: &[f64], id: String| -> usize {
            let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            *seen.entry(key).or_insert_with(|| {
                pool.points.push(v.to_vec());
                pool.ids.push(id);
                pool.points.len() - 1
            })
        };
        for (s, trace) in traces.iter().enumerate() {
            let seq = s + offset;
            let xs =
                trace.inputs.iter().enumerate().map(|(t, v)| intern(&mut pool, v, format!("x{seq}_{t}"))).collect();
            pool.x_index.push(xs);
            let hs =
                trace.hiddens.iter().enumerate().map(|(t, v)| intern(&mut pool, v, format!("h{seq}_{t}"))).collect();
            pool.h_index.push(hs);
        }
        pool
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn semantic_points(&self) -> Vec<SemanticPoint> {
        self.points.iter().cloned().map(SemanticPoint::abstract_point).collect()
    }
}

fn pools(traces: &[HiddenTrace], per_sequence: bool) -> Vec<(usize, PointPool)> {
    if per_sequence {
        traces.iter().enumerate().map(|(i, t)| (i, PointPool::build(std::slice::from_ref(t), i))).collect()
    } else {
        vec![(0, PointPool::build(traces, 0))]
    }
}

/// Reduces the pooled points (or each sequence's points) to the plane.
pub fn reduce_stage(traces: &[HiddenTrace], cfg: &ReductionConfig) -> Result<ReducedMap> {
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (_, pool) in pools(traces, cfg.per_sequence) {
        let map = reduce(&pool.semantic_points(), cfg)?;
        ids.extend(pool.ids);
        coords.extend(map.coords2d);
    }
    Ok(ReducedMap::indexed(coords).with_ids(ids))
}

/// Looks every trace position up in a reduced map produced by [`reduce_stage`].
pub fn reduced_traces(traces: &[HiddenTrace], map: &ReducedMap, per_sequence: bool) -> Result<Vec<ReducedTrace>> {
    let by_id: HashMap<&str, Point2D> =
        map.source_ids.iter().map(String::as_str).zip(map.coords2d.iter().copied()).collect();
    let mut out = Vec::with_capacity(traces.len());
    for (offset, pool) in pools(traces, per_sequence) {
        let lookup = |k: usize| {
            by_id
                .get(pool.ids[k].as_str())
                .copied()
                .ok_or_else(|| Error::Config(format!("reduced map has no point {}", pool.ids[k])))
        };
        for (s, (xs, hs)) in pool.x_index.iter().zip(&pool.h_index).enumerate() {
            let x2d = xs.iter().map(|&k| lookup(k)).collect::<Result<Vec<_>>>()?;
            let h2d = hs.iter().map(|&k| lookup(k)).collect::<Result<Vec<_>>>()?;
            out.push(ReducedTrace::new(offset + s, x2d, h2d)?);
        }
    }
    Ok(out)
}

pub fn sweep_config(cfg: &ExperimentConfig) -> SweepConfig {
    let indicators = if cfg.reduction.per_sequence {
        // offsets are not comparable across separately reduced maps
        let mut keep = vec![Indicator::Scrr, Indicator::Scpr, Indicator::Scfm, Indicator::Cihr];
        if cfg.eval.cihr_nd {
            keep.push(Indicator::CihrNd);
        }
        keep
    } else {
        Vec::new()
    };
    SweepConfig { normalization: cfg.eval.normalization, indicators, ..SweepConfig::default() }
}

pub fn indicator_stage(
    cfg: &ExperimentConfig,
    traces: &[HiddenTrace],
    reduced: &[ReducedTrace],
    cell: &str,
) -> Result<(Vec<WindowMeasurement>, IndicatorTable)> {
    let lengths = cfg.window_lengths();
    let sweep_cfg = sweep_config(cfg);
    let full = cfg.eval.cihr_nd.then_some(traces);
    let ms = measure_all(reduced, full, &lengths, sweep_cfg.eps)?;
    let table = table_from_measurements(&ms, cell, &lengths, &sweep_cfg)?;
    Ok((ms, table))
}

pub const TRACE_HEADER: &str = "sequence,position,token,kind,vector";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn traces_to_csv(traces: &[HiddenTrace]) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for (i, t) in traces.iter().enumerate() {
        for p in 0..t.len() {
            s.push_str(&format!("{i},{p},{},x,{}\n", t.tokens[p], join(&t.inputs[p])));
            s.push_str(&format!("{i},{p},{},h,{}\n", t.tokens[p], join(&t.hiddens[p])));
        }
    }
    s
}

pub fn parse_traces(text: &str, path: &Path) -> Result<Vec<HiddenTrace>> {
    let err = |line: usize, msg: &str| Error::Parse { path: path.to_path_buf(), line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(TRACE_HEADER) {
        return Err(err(1, "expected trace header"));
    }
    let mut out: Vec<HiddenTrace> = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.splitn(5, ',').collect();
        if f.len() != 5 {
            return Err(err(i + 1, "expected five fields"));
        }
        let seq: usize = f[0].parse().map_err(|_| err(i + 1, "bad sequence"))?;
        let pos: usize = f[1].parse().map_err(|_| err(i + 1, "bad position"))?;
        let token: usize = f[2].parse().map_err(|_| err(i + 1, "bad token"))?;
        let v = f[4]
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| err(i + 1, "bad vector"))?;
        if seq == out.len() {
            out.push(HiddenTrace { tokens: Vec::new(), inputs: Vec::new(), hiddens: Vec::new() });
        }
        if seq + 1 != out.len() {
            return Err(err(i + 1, "sequences out of order"));
        }
        let t = out.last_mut().expect("pushed above");
        match f[3] {
            "x" if pos == t.inputs.len() => {
                t.tokens.push(token);
                t.inputs.push(v);
            }
            "h" if pos + 1 == t.inputs.len() && pos == t.hiddens.len() => t.hiddens.push(v),
            _ => return Err(err(i + 1, "positions out of order")),
        }
    }
    if out.iter().any(|t| t.inputs.len() != t.hiddens.len()) {
        return Err(err(0, "trace is missing hidden vectors"));
    }
    Ok(out)
}

pub fn write_traces(path: impl AsRef<Path>, traces: &[HiddenTrace]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, traces_to_csv(traces)).map_err(|e| Error::io(path, e))
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<HiddenTrace>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_traces(&text, path)
}
