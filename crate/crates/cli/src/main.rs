use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memscope::corpus::CorpusSplits;
use memscope::experiment::{
    self, files, indicator_svg, radar_summary, radar_svg, radar_to_csv, read_traces, reduce_stage, reduced_traces,
    write_synthetic_corpus, write_text, write_traces, ExperimentConfig, SynthConfig,
};
use memscope::indicators::{measurements_to_csv, IndicatorTable};
use memscope::reduction::ReducedMap;
use memscope::rnn::{read_checkpoint, write_checkpoint, CellKind, Checkpoint};
use memscope::{Error, Result};

/// Memory-ability indicators for recurrent language models.
#[derive(Parser)]
#[command(name = "memscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; defaults apply to anything it omits.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed for model initialisation and reduction.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corpus directory with train/valid/test splits.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CellArg {
    /// Restrict to one cell type; defaults to every configured cell.
    #[arg(long)]
    cell: Option<CellKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Train language models and write checkpoints and epoch logs.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellArg,
    },
    /// Trace the evaluation sequences through trained checkpoints.
    Trace {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellArg,
    },
    /// Reduce traced points to the plane.
    Reduce {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellArg,
    },
    /// Measure every window and write the indicator table.
    Indicators {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellArg,
    },
    /// Summarise an indicator table as radar values.
    Radar {
        #[command(flatten)]
        common: Common,
        /// Indicator table; defaults to the one in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Perplexity against BPTT length for every cell.
    BpttSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated BPTT lengths; defaults to the config.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
    },
    /// Train, trace, reduce and measure every cell, then write all reports.
    FullStudy {
        #[command(flatten)]
        common: Common,
    },
    /// Write a seeded synthetic corpus.
    SynthCorpus {
        /// Target directory.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        vocab: usize,
        #[arg(long, default_value_t = 30_000)]
        train_tokens: usize,
        #[arg(long, default_value_t = 8_000)]
        eval_tokens: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(c) = &common.corpus {
        cfg.corpus.path = c.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cells(cfg: &ExperimentConfig, arg: &CellArg) -> Vec<CellKind> {
    arg.cell.map_or_else(|| cfg.model.cells.clone(), |c| vec![c])
}

fn load_checkpoint(cfg: &ExperimentConfig, splits: &CorpusSplits, cell: CellKind) -> Result<Checkpoint> {
    let ckpt = read_checkpoint(cfg.out.join(files::checkpoint(cell.name())))?;
    if ckpt.vocab_sha256 != splits.vocab.fingerprint() {
        return Err(Error::Checkpoint(format!("{cell} checkpoint was trained on a different vocabulary")));
    }
    Ok(ckpt)
}

fn train_cmd(cfg: &ExperimentConfig, cells: &[CellKind]) -> Result<()> {
    let splits = experiment::load_corpus(cfg)?;
    for &cell in cells {
        let (params, log) = experiment::train_stage(cfg, &splits, cell)?;
        write_text(cfg.out.join(files::train_log(cell.name())), &log.to_csv())?;
        let ckpt = Checkpoint {
            config: cfg.model_config(cell, splits.vocab.len()),
            vocab_sha256: splits.vocab.fingerprint(),
            params,
        };
        write_checkpoint(cfg.out.join(files::checkpoint(cell.name())), &ckpt)?;
        let last = log.epochs.last();
        println!(
            "{cell}: {} epochs, valid PPL {}",
            log.epochs.len(),
            last.map_or_else(|| "n/a".to_string(), |e| format!("{:.3}", e.valid_ppl))
        );
    }
    Ok(())
}

fn trace_cmd(cfg: &ExperimentConfig, cells: &[CellKind]) -> Result<()> {
    let splits = experiment::load_corpus(cfg)?;
    let seqs = experiment::evaluation_sequences(&splits.valid, cfg.eval.sequences, cfg.corpus.bptt)?;
    for &cell in cells {
        let ckpt = load_checkpoint(cfg, &splits, cell).map_err(|e| e.in_stage(format!("trace {cell}")))?;
        let traces = experiment::extract_traces(&ckpt.params, &seqs, cfg.eval.identity_debug)?;
        write_traces(cfg.out.join(files::traces(cell.name())), &traces)?;
        println!("{cell}: {} sequences traced", traces.len());
    }
    Ok(())
}

fn reduce_cmd(cfg: &ExperimentConfig, cells: &[CellKind]) -> Result<()> {
    for &cell in cells {
        let traces = read_traces(cfg.out.join(files::traces(cell.name())))?;
        let map = reduce_stage(&traces, &cfg.reduction_config()).map_err(|e| e.in_stage(format!("reduce {cell}")))?;
        map.write_csv(cfg.out.join(files::reduced(cell.name())))?;
        println!("{cell}: {} points reduced", map.len());
    }
    Ok(())
}

fn indicators_cmd(cfg: &ExperimentConfig, cells: &[CellKind]) -> Result<IndicatorTable> {
    let mut table = IndicatorTable::default();
    for &cell in cells {
        let name = cell.name();
        let traces = read_traces(cfg.out.join(files::traces(name)))?;
        let map = ReducedMap::read_csv(cfg.out.join(files::reduced(name)))?;
        let reduced = reduced_traces(&traces, &map, cfg.reduction.per_sequence)?;
        let (ms, t) = experiment::indicator_stage(cfg, &traces, &reduced, name)
            .map_err(|e| e.in_stage(format!("indicators {cell}")))?;
        write_text(cfg.out.join(files::measurements(name)), &measurements_to_csv(&ms))?;
        table.extend(t);
    }
    if let Err(problems) = table.validate() {
        return Err(Error::Config(problems.join("; ")).in_stage("indicator post-check"));
    }
    write_text(cfg.out.join(files::INDICATORS_CSV), &table.to_csv())?;
    let dataset = dataset_name(&cfg.corpus.path);
    write_text(cfg.out.join(files::INDICATORS_SVG), &indicator_svg(&table, &dataset))?;
    println!("{} indicator rows written", table.rows.len());
    Ok(table)
}

fn dataset_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into())
}

fn radar_cmd(cfg: &ExperimentConfig, input: Option<PathBuf>) -> Result<()> {
    let input = input.unwrap_or_else(|| cfg.out.join(files::INDICATORS_CSV));
    let table = IndicatorTable::read_csv(&input)?;
    let rows = radar_summary(&table)?;
    write_text(cfg.out.join(files::RADAR_CSV), &radar_to_csv(&rows))?;
    write_text(cfg.out.join(files::RADAR_SVG), &radar_svg(&rows))?;
    for r in &rows {
        println!("{} {} {:.4} (W={})", r.cell, r.indicator, r.value, r.w);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, cell } => {
            let cfg = load_config(&common)?;
            train_cmd(&cfg, &cells(&cfg, &cell))
        }
        Command::Trace { common, cell } => {
            let cfg = load_config(&common)?;
            trace_cmd(&cfg, &cells(&cfg, &cell))
        }
        Command::Reduce { common, cell } => {
            let cfg = load_config(&common)?;
            reduce_cmd(&cfg, &cells(&cfg, &cell))
        }
        Command::Indicators { common, cell } => {
            let cfg = load_config(&common)?;
            indicators_cmd(&cfg, &cells(&cfg, &cell)).map(|_| ())
        }
        Command::Radar { common, input } => radar_cmd(&load_config(&common)?, input),
        Command::BpttSweep { common, values } => {
            let cfg = load_config(&common)?;
            let values = if values.is_empty() { cfg.bptt_sweep.values.clone() } else { values };
            for r in experiment::run_bptt_sweep(&cfg, &values)? {
                println!("{} bptt={} valid={:.3} test={:.3}", r.cell, r.bptt, r.valid_ppl, r.test_ppl);
            }
            Ok(())
        }
        Command::FullStudy { common } => {
            let cfg = load_config(&common)?;
            let report = experiment::run_memory_study(&cfg)?;
            println!("{} indicator rows, reports in {}", report.table.rows.len(), report.out.display());
            Ok(())
        }
        Command::SynthCorpus { dir, seed, vocab, train_tokens, eval_tokens } => {
            let synth = SynthConfig { seed, vocab, train_tokens, eval_tokens, ..SynthConfig::default() };
            write_synthetic_corpus(&dir, &synth)?;
            println!("synthetic corpus written to {}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
