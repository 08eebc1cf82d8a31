//! Planar reductions of semantic point sets.

mod pca;
mod tsne;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2D;

pub use pca::{pca_project_2d, Pca};
pub use tsne::{compute_affinities, kl_divergence, tsne_embed, tsne_rows, Affinities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    Tsne,
    Pca,
    /// First two coordinates, unchanged. Only meaningful for debugging.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    pub method: ReductionMethod,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
    /// Reduce each sequence on its own instead of the pooled point set.
    pub per_sequence: bool,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            method: ReductionMethod::Tsne,
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
            per_sequence: false,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perplexity >= 2.0) {
            return Err(Error::Config(format!("perplexity must be at least 2, got {}", self.perplexity)));
        }
        if self.iterations < 250 {
            return Err(Error::Config(format!("t-SNE needs at least 250 iterations, got {}", self.iterations)));
        }
        if !(self.learning_rate > 0.0) || !(self.early_exaggeration >= 1.0) {
            return Err(Error::Config("t-SNE learning rate and exaggeration must be positive".into()));
        }
        Ok(())
    }

    /// Step size actually used for `n` points. Each point feels an exaggerated
    /// attraction of roughly `4 * early_exaggeration / n` per unit offset, so the
    /// rate is capped at `n / (4 * early_exaggeration)` to keep that step stable.
    pub fn effective_learning_rate(&self, n: usize) -> f64 {
        self.learning_rate.min((n as f64 / (4.0 * self.early_exaggeration)).max(1.0))
    }

    /// Perplexity actually targeted for `n` points: at most `(n - 1) / 3`, at least 1.
    pub fn effective_perplexity(&self, n: usize) -> f64 {
        self.perplexity.min((n as f64 - 1.0) / 3.0).max(1.0)
    }
}

/// Planar coordinates with the id of the source point each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMap {
    pub source_ids: Vec<String>,
    pub coords2d: Vec<Point2D>,
}

impl ReducedMap {
    /// Ids `0, 1, ...` in input order.
    pub fn indexed(coords2d: Vec<Point2D>) -> Self {
        let source_ids = (0..coords2d.len()).map(|i| i.to_string()).collect();
        Self { source_ids, coords2d }
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Self {
        assert_eq!(ids.len(), self.coords2d.len());
        self.source_ids = ids;
        self
    }

    pub fn len(&self) -> usize {
        self.coords2d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords2d.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,x,y\n");
        for (id, p) in self.source_ids.iter().zip(&self.coords2d) {
            s.push_str(&format!("{id},{},{}\n", p.x, p.y));
        }
        s
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "id,x,y")) => {}
            _ => return Err(parse_err(path, 1, "expected header id,x,y")),
        }
        let mut source_ids = Vec::new();
        let mut coords2d = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.rsplitn(3, ',');
            let (y, x, id) = match (parts.next(), parts.next(), parts.next()) {
                (Some(y), Some(x), Some(id)) => (y, x, id),
                _ => return Err(parse_err(path, i + 1, "expected three fields")),
            };
            let num = |v: &str| v.parse::<f64>().map_err(|_| parse_err(path, i + 1, &format!("bad number {v:?}")));
            source_ids.push(id.to_string());
            coords2d.push(Point2D::new(num(x)?, num(y)?));
        }
        Ok(Self { source_ids, coords2d })
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
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.to_string() }
}

/// First two coordinates of each point.
pub fn identity_2d(points: &[crate::geometry::SemanticPoint]) -> Result<ReducedMap> {
    let coords = points
        .iter()
        .map(|p| match p.coords() {
            [x, y, ..] => Ok(Point2D::new(*x, *y)),
            c => Err(Error::DimensionMismatch { expected: 2, found: c.len() }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReducedMap::indexed(coords))
}

/// Dispatches on `config.method`.
pub fn reduce(points: &[crate::geometry::SemanticPoint], config: &ReductionConfig) -> Result<ReducedMap> {
    match config.method {
        ReductionMethod::Tsne => tsne_embed(points, config),
        ReductionMethod::Pca => pca_project_2d(points, config.seed),
        ReductionMethod::Identity => identity_2d(points),
    }
}
