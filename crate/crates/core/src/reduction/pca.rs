use nalgebra::{DMatrix, SymmetricEigen};

use super::ReducedMap;
use crate::error::{Error, Result};
use crate::geometry::{check_dimensions, Point2D, SemanticPoint};

/// Principal-component projection of mean-centred data.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Descending eigenvalues of the sample covariance (divisor `N - 1`).
    pub eigenvalues: Vec<f64>,
    /// Unit loading vectors, aligned with `eigenvalues`.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

fn covariance(rows: &[&[f64]], mean: &[f64]) -> DMatrix<f64> {
    let d = mean.len();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in rows {
        for i in 0..d {
            let ci = row[i] - mean[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += ci * (row[j] - mean[j]);
            }
        }
    }
    let denom = (rows.len() - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

impl Pca {
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::TooFewPoints { needed: 3, got: rows.len() });
        }
        let d = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: r.len() });
        }
        if rows.iter().flat_map(|r| r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA input".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let eig = SymmetricEigen::new(covariance(rows, &mean));
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        if eigenvalues[0] <= 0.0 {
            return Err(Error::RankDeficient("all points are identical".into()));
        }
        let components = order
            .iter()
            .map(|&k| {
                let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
                // sign convention: largest-magnitude loading is positive
                let pivot = v
                    .iter()
                    .copied()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                    .map(|(_, x)| x)
                    .unwrap_or(1.0);
                if pivot < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        Ok(Self { eigenvalues, components, mean })
    }

    /// Coordinate of `row` along component `k`.
    pub fn project(&self, row: &[f64], k: usize) -> f64 {
        row.iter().zip(&self.mean).zip(&self.components[k]).map(|((x, m), c)| (x - m) * c).sum()
    }

    /// Components whose variance is numerically zero project to exactly 0.
    fn is_degenerate(&self, k: usize) -> bool {
        self.eigenvalues.get(k).is_none_or(|&l| l <= self.eigenvalues[0] * 1e-12)
    }

    pub fn project_2d(&self, row: &[f64]) -> Point2D {
        let y = if self.is_degenerate(1) { 0.0 } else { self.project(row, 1) };
        Point2D::new(self.project(row, 0), y)
    }
}

/// Projects points onto their top two principal components.
///
/// The eigendecomposition is deterministic, so `_seed` only exists for
/// interface symmetry with [`super::tsne_embed`].
pub fn pca_project_2d(points: &[SemanticPoint], _seed: u64) -> Result<ReducedMap> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: points.len() });
    }
    check_dimensions(points, points[0].dim())?;
    let rows: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();
    let pca = Pca::fit(&rows)?;
    let coords2d = rows.iter().map(|r| pca.project_2d(r)).collect();
    Ok(ReducedMap::indexed(coords2d))
}
