//! Points of the semantic space and full-dimensional hull membership.

use serde::{Deserialize, Serialize};

use super::simplex::fit_convex_weights;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointKind {
    /// Corresponds to a vocabulary word.
    Specific,
    /// Has no word counterpart (hidden states, convex combinations).
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticPoint {
    coords: Vec<f64>,
    kind: PointKind,
    label: Option<String>,
}

impl SemanticPoint {
    pub fn specific(label: impl Into<String>, coords: Vec<f64>) -> Self {
        Self { coords, kind: PointKind::Specific, label: Some(label.into()) }
    }

    pub fn abstract_point(coords: Vec<f64>) -> Self {
        Self { coords, kind: PointKind::Abstract, label: None }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Checks that every point has dimension `dim`.
pub fn check_dimensions(points: &[SemanticPoint], dim: usize) -> Result<()> {
    match points.iter().find(|p| p.dim() != dim) {
        Some(p) => Err(Error::DimensionMismatch { expected: dim, found: p.dim() }),
        None => Ok(()),
    }
}

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Weighted sum of points under convex weights; the result is abstract.
pub fn convex_combination(points: &[SemanticPoint], weights: &[f64]) -> Result<SemanticPoint> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if weights.len() != points.len() {
        return Err(Error::InvalidConvexWeights(format!("{} weights for {} points", weights.len(), points.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidConvexWeights(format!("weight {w} is negative or non-finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidConvexWeights(format!("weights sum to {total}")));
    }
    let dim = points[0].dim();
    check_dimensions(points, dim)?;
    let mut coords = vec![0.0; dim];
    for (p, &w) in points.iter().zip(weights) {
        for (c, x) in coords.iter_mut().zip(p.coords()) {
            *c += w * x;
        }
    }
    Ok(SemanticPoint::abstract_point(coords))
}

/// Whether `q` is within Euclidean distance `eps` of the convex hull of `points`.
///
/// Decided by linear feasibility, so it works in any dimension without
/// enumerating facets.
pub fn hull_contains_nd(points: &[SemanticPoint], q: &SemanticPoint, eps: f64) -> Result<bool> {
    hull_contains_raw(&points.iter().map(|p| p.coords()).collect::<Vec<_>>(), q.coords(), eps)
}

/// Same as [`hull_contains_nd`] on bare coordinate slices.
pub fn hull_contains_raw(points: &[&[f64]], q: &[f64], eps: f64) -> Result<bool> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let dim = q.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
    }
    if points.iter().flat_map(|p| p.iter()).chain(q).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("hull membership input".into()));
    }
    Ok(fit_convex_weights(points, q).residual <= eps)
}
