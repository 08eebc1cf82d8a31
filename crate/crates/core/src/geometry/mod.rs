//! Convex geometry: exact planar hulls and full-dimensional hull membership.

mod planar;
mod semantic;
mod simplex;

pub use planar::{
    contains_point_2d, convex_hull_2d, convex_intersection, orient, polygon_area, polygon_centroid, ConvexPolygon2D,
    Point2D, CONTAINS_EPS, ORIENT_EPS,
};
pub use semantic::{
    check_dimensions, convex_combination, hull_contains_nd, hull_contains_raw, PointKind, SemanticPoint,
};
pub use simplex::{fit_convex_weights, HullFit};
