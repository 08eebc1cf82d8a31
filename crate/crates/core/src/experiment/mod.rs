//! End-to-end studies: train every cell, trace the validation split, reduce,
//! sweep the indicators and write CSV/SVG reports with a manifest.

mod checks;
mod config;
mod pipeline;
mod report;
mod synth;

use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::corpus::CorpusSplits;
use crate::error::{Error, Result};
use crate::indicators::{measurements_to_csv, IndicatorTable};
use crate::rnn::{perplexity, train, write_checkpoint, Checkpoint, TrainLog};

pub use checks::{bptt_checks, ordering_checks, table_checks, Check};
pub use config::{BpttSweepConfig, EvalConfig, ExperimentConfig, ModelSettings};
pub use pipeline::{
    evaluation_sequences, extract_traces, indicator_stage, parse_traces, read_traces, reduce_stage, reduced_traces,
    sweep_config, traces_to_csv, train_stage, write_traces, PointPool, TRACE_HEADER,
};
pub use report::{
    bptt_svg, bptt_to_csv, indicator_svg, parse_bptt, parse_radar, radar_summary, radar_svg, radar_to_csv, write_text,
    BpttRow, Manifest, RadarRow, BPTT_HEADER, RADAR_HEADER,
};
pub use synth::{write_synthetic_corpus, SynthConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// File names inside the output directory.
pub mod files {
    pub const INDICATORS_CSV: &str = "indicators.csv";
    pub const INDICATORS_SVG: &str = "indicators.svg";
    pub const RADAR_CSV: &str = "radar.csv";
    pub const RADAR_SVG: &str = "radar.svg";
    pub const BPTT_CSV: &str = "bptt.csv";
    pub const BPTT_SVG: &str = "bptt.svg";
    pub const MANIFEST: &str = "manifest.txt";

    pub fn train_log(cell: &str) -> String {
        format!("train_{cell}.csv")
    }
    pub fn checkpoint(cell: &str) -> String {
        format!("checkpoints/{cell}.ckpt")
    }
    pub fn traces(cell: &str) -> String {
        format!("traces_{cell}.csv")
    }
    pub fn reduced(cell: &str) -> String {
        format!("reduced_{cell}.csv")
    }
    pub fn measurements(cell: &str) -> String {
        format!("measurements_{cell}.csv")
    }
}

pub fn load_corpus(cfg: &ExperimentConfig) -> Result<CorpusSplits> {
    CorpusSplits::load(&cfg.corpus).map_err(|e| e.in_stage("corpus"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `text` to `out/name`, recording its digest in the manifest.
fn emit(out: &Path, name: &str, text: &str, manifest: &mut Manifest) -> Result<PathBuf> {
    let path = out.join(name);
    write_text(&path, text)?;
    manifest.push(format!("output.{name}.sha256"), sha256_hex(text.as_bytes()));
    Ok(path)
}

fn manifest_header(cfg: &ExperimentConfig, splits: &CorpusSplits) -> Manifest {
    let mut m = Manifest::default();
    m.push("tool", "memscope");
    m.push("version", VERSION);
    m.push("config.sha256", cfg.hash());
    for (k, v) in cfg.flatten() {
        m.push(format!("config.{k}"), v);
    }
    m.push("corpus.vocab_size", splits.vocab.len());
    m.push("corpus.vocab_sha256", splits.vocab.fingerprint());
    m.push("corpus.train_tokens", splits.train.len());
    m.push("corpus.valid_tokens", splits.valid.len());
    m.push("corpus.test_tokens", splits.test.len());
    m
}

pub struct StudyReport {
    pub table: IndicatorTable,
    pub radar: Vec<RadarRow>,
    pub logs: Vec<(String, TrainLog)>,
    pub manifest: Manifest,
    pub out: PathBuf,
}

/// Full memory study for every configured cell.
pub fn run_memory_study(cfg: &ExperimentConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let splits = load_corpus(cfg)?;
    let out = cfg.out.clone();
    let mut manifest = manifest_header(cfg, &splits);
    let seqs = evaluation_sequences(&splits.valid, cfg.eval.sequences, cfg.corpus.bptt)
        .map_err(|e| e.in_stage("evaluation set"))?;
    manifest.push("eval.sequences_used", seqs.len());

    let mut table = IndicatorTable::default();
    let mut logs = Vec::new();
    for &cell in &cfg.model.cells {
        let name = cell.name();
        let started = Instant::now();
        let (params, log) = train_stage(cfg, &splits, cell)?;
        manifest.push(format!("timing.{name}.train_seconds"), format!("{:.3}", started.elapsed().as_secs_f64()));
        manifest.push(format!("train.{name}.epochs"), log.epochs.len());
        if let Some(ppl) = log.final_valid_ppl() {
            manifest.push(format!("train.{name}.final_valid_ppl"), ppl);
        }
        emit(&out, &files::train_log(name), &log.to_csv(), &mut manifest)?;
        let ckpt = Checkpoint {
            config: cfg.model_config(cell, splits.vocab.len()),
            vocab_sha256: splits.vocab.fingerprint(),
            params,
        };
        write_checkpoint(out.join(files::checkpoint(name)), &ckpt)?;

        let traces = extract_traces(&ckpt.params, &seqs, cfg.eval.identity_debug)
            .map_err(|e| e.in_stage(format!("trace {name}")))?;
        emit(&out, &files::traces(name), &traces_to_csv(&traces), &mut manifest)?;

        let started = Instant::now();
        let reduction = cfg.reduction_config();
        let map = reduce_stage(&traces, &reduction).map_err(|e| e.in_stage(format!("reduce {name}")))?;
        manifest.push(format!("timing.{name}.reduce_seconds"), format!("{:.3}", started.elapsed().as_secs_f64()));
        manifest.push(format!("reduce.{name}.points"), map.len());
        emit(&out, &files::reduced(name), &map.to_csv(), &mut manifest)?;

        let started = Instant::now();
        let reduced = reduced_traces(&traces, &map, reduction.per_sequence)?;
        let (ms, cell_table) =
            indicator_stage(cfg, &traces, &reduced, name).map_err(|e| e.in_stage(format!("indicators {name}")))?;
        manifest.push(format!("timing.{name}.indicator_seconds"), format!("{:.3}", started.elapsed().as_secs_f64()));
        emit(&out, &files::measurements(name), &measurements_to_csv(&ms), &mut manifest)?;
        table.extend(cell_table);
        logs.push((name.to_string(), log));
    }

    if let Err(problems) = table.validate() {
        return Err(Error::Config(problems.join("; ")).in_stage("indicator post-check"));
    }
    let dataset =
        cfg.corpus.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into());
    emit(&out, files::INDICATORS_CSV, &table.to_csv(), &mut manifest)?;
    emit(&out, files::INDICATORS_SVG, &indicator_svg(&table, &dataset), &mut manifest)?;
    let radar = radar_summary(&table)?;
    emit(&out, files::RADAR_CSV, &radar_to_csv(&radar), &mut manifest)?;
    emit(&out, files::RADAR_SVG, &radar_svg(&radar), &mut manifest)?;
    write_text(out.join(files::MANIFEST), &manifest.to_text())?;
    Ok(StudyReport { table, radar, logs, manifest, out })
}

/// Trains every cell at every BPTT length with otherwise identical settings.
pub fn run_bptt_sweep(cfg: &ExperimentConfig, values: &[usize]) -> Result<Vec<BpttRow>> {
    cfg.validate()?;
    if values.is_empty() || values.contains(&0) {
        return Err(Error::Config("BPTT values must be non-empty and positive".into()));
    }
    let splits = load_corpus(cfg)?;
    let mut manifest = manifest_header(cfg, &splits);
    let mut rows = Vec::new();
    for &cell in &cfg.model.cells {
        for &bptt in values {
            let started = Instant::now();
            let model = crate::rnn::ModelConfig { bptt, ..cfg.model_config(cell, splits.vocab.len()) };
            let stage = |e: Error| e.in_stage(format!("bptt {cell} {bptt}"));
            let (params, _) = train(&model, &cfg.train, &splits.train, &splits.valid).map_err(stage)?;
            let valid_ppl = perplexity(&params, &splits.valid).map_err(stage)?;
            let test_ppl = perplexity(&params, &splits.test).map_err(stage)?;
            manifest
                .push(format!("timing.{cell}.bptt_{bptt}_seconds"), format!("{:.3}", started.elapsed().as_secs_f64()));
            rows.push(BpttRow { cell: cell.name().to_string(), bptt, valid_ppl, test_ppl });
        }
    }
    let out = &cfg.out;
    emit(out, files::BPTT_CSV, &bptt_to_csv(&rows), &mut manifest)?;
    emit(out, files::BPTT_SVG, &bptt_svg(&rows), &mut manifest)?;
    write_text(out.join("manifest_bptt.txt"), &manifest.to_text())?;
    Ok(rows)
}
