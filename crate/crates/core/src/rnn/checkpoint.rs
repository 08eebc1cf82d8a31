//! Plain-text model checkpoints.
//!
//! ```text
//! memscope-checkpoint 1
//! cell lstm
//! embed_dim 50
//! ...
//! vocab_sha256 <hex>
//! tensor embedding <rows> <cols>
//! <one row of values per line>
//! ...
//! end
//! ```
//!
//! Values use the shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CellKind, ModelConfig, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &str = "memscope-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab_sha256: String,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "cell {}", c.cell);
        let _ = writeln!(s, "embed_dim {}", c.embed_dim);
        let _ = writeln!(s, "hidden_dim {}", c.hidden_dim);
        let _ = writeln!(s, "bptt {}", c.bptt);
        let _ = writeln!(s, "vocab_size {}", c.vocab_size);
        let _ = writeln!(s, "seed {}", c.seed);
        let _ = writeln!(s, "vocab_sha256 {}", self.vocab_sha256);
        let p = &self.params;
        let shapes = [
            (p.embedding.rows(), p.embedding.cols()),
            (p.w_x.rows(), p.w_x.cols()),
            (p.w_h.rows(), p.w_h.cols()),
            (1, p.bias.len()),
            (1, p.out_bias.len()),
        ];
        for ((name, data), (rows, cols)) in p.tensors().into_iter().zip(shapes) {
            let _ = writeln!(s, "tensor {name} {rows} {cols}");
            for row in data.chunks(cols.max(1)) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Lines(text.lines());
        let header = r.next("header")?;
        if header != format!("{MAGIC} {VERSION}") {
            return Err(bad(format!("unsupported header {header:?}")));
        }
        let cell: CellKind = r.field("cell")?.parse()?;
        let embed_dim = r.number("embed_dim")?;
        let hidden_dim = r.number("hidden_dim")?;
        let bptt = r.number("bptt")?;
        let vocab_size = r.number("vocab_size")?;
        let seed = r.number("seed")?;
        let vocab_sha256 = r.field("vocab_sha256")?.to_string();
        let config = ModelConfig { cell, embed_dim, hidden_dim, bptt, vocab_size, seed };
        config.validate()?;

        let mut params = ModelParams::zeros(cell, vocab_size, embed_dim);
        let expected: Vec<(&str, usize)> = params.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
        for (idx, (name, len)) in expected.into_iter().enumerate() {
            let head = r.next("tensor header")?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let (rows, cols) = match parts.as_slice() {
                ["tensor", n, rows, cols] if *n == name => (
                    rows.parse::<usize>().map_err(|_| bad(format!("bad rows in {head:?}")))?,
                    cols.parse::<usize>().map_err(|_| bad(format!("bad cols in {head:?}")))?,
                ),
                _ => return Err(bad(format!("expected tensor {name}, found {head:?}"))),
            };
            if rows * cols != len {
                return Err(bad(format!("tensor {name} has shape {rows}x{cols}, expected {len} values")));
            }
            let mut values = Vec::with_capacity(len);
            for _ in 0..rows {
                for tok in r.next(name)?.split_whitespace() {
                    values.push(tok.parse::<f64>().map_err(|_| bad(format!("bad value {tok:?} in {name}")))?);
                }
            }
            if values.len() != len {
                return Err(bad(format!("tensor {name}: {} values, expected {len}", values.len())));
            }
            params.tensors_mut()[idx].1.copy_from_slice(&values);
        }
        if r.next("end")? != "end" {
            return Err(bad("missing end marker".into()));
        }
        Ok(Self { config, vocab_sha256, params })
    }
}

fn bad(msg: String) -> Error {
    Error::Checkpoint(msg)
}

struct Lines<'a>(std::str::Lines<'a>);

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.0.next().ok_or_else(|| bad(format!("truncated before {what}")))
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next(key)?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(bad(format!("expected {key}, found {line:?}"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse().map_err(|_| bad(format!("bad {key}: {v:?}")))
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, ckpt.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::parse(&text)
}
