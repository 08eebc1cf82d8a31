//! Planar convex geometry on reduced coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on cross products for orientation tests.
pub const ORIENT_EPS: f64 = 1e-9;

/// Default boundary tolerance for point containment.
pub const CONTAINS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, other: Point2D) -> Point2D {
        Point2D::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point2D) -> Point2D {
        Point2D::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point2D {
        Point2D::new(self.x * s, self.y * s)
    }

    pub fn dot(self, other: Point2D) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2D) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn distance(self, other: Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lex_cmp(&self, other: &Point2D) -> std::cmp::Ordering {
        self.x.total_cmp(&other.x).then(self.y.total_cmp(&other.y))
    }
}

impl fmt::Display for Point2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Orientation of `c` relative to the directed line `a -> b`.
#[inline]
pub fn orient(a: Point2D, b: Point2D, c: Point2D) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// A convex polygon with counter-clockwise vertices.
///
/// Zero, one and two vertices encode the empty set, a point and a segment.
/// Polygons produced by this module always start at the lexicographically
/// smallest vertex, which makes hull output canonical.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvexPolygon2D {
    vertices: Vec<Point2D>,
}

impl ConvexPolygon2D {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a polygon from vertices already in counter-clockwise convex order.
    pub fn from_ccw(vertices: Vec<Point2D>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("polygon vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if n > 1 && vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::Config("duplicate consecutive polygon vertices".into()));
            }
        }
        if n >= 3 {
            for i in 0..n {
                let turn = orient(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                if turn < -ORIENT_EPS {
                    return Err(Error::Config("polygon is not convex and counter-clockwise".into()));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2D] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Fewer than three vertices: zero area.
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    pub fn centroid(&self) -> Option<Point2D> {
        if self.is_empty() {
            None
        } else {
            Some(polygon_centroid(self))
        }
    }

    pub fn contains(&self, p: Point2D) -> bool {
        contains_point_2d(self, p, CONTAINS_EPS)
    }

    pub fn translate(&self, by: Point2D) -> Self {
        Self { vertices: self.vertices.iter().map(|v| v.add(by)).collect() }
    }
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull_2d(points: &[Point2D]) -> Result<ConvexPolygon2D> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("hull input point".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(Point2D::lex_cmp);
    pts.dedup();
    if pts.len() < 3 {
        return Ok(ConvexPolygon2D { vertices: pts });
    }

    let mut hull: Vec<Point2D> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= ORIENT_EPS {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= ORIENT_EPS {
            hull.pop();
        }
        hull.push(p);
    }
    // last point repeats the first
    hull.pop();
    Ok(ConvexPolygon2D { vertices: hull })
}

/// Shoelace area; zero for degenerate polygons.
pub fn polygon_area(poly: &ConvexPolygon2D) -> f64 {
    let v = &poly.vertices;
    if v.len() < 3 {
        return 0.0;
    }
    let origin = v[0];
    let twice: f64 = v.windows(2).skip(1).map(|w| w[0].sub(origin).cross(w[1].sub(origin))).sum();
    (0.5 * twice).max(0.0)
}

/// Area-weighted centroid. Degenerate polygons fall back to the vertex mean.
pub fn polygon_centroid(poly: &ConvexPolygon2D) -> Point2D {
    let v = &poly.vertices;
    let vertex_mean = || {
        let n = v.len().max(1) as f64;
        let s = v.iter().fold(Point2D::new(0.0, 0.0), |acc, p| acc.add(*p));
        s.scale(1.0 / n)
    };
    if v.len() < 3 {
        return vertex_mean();
    }
    let origin = v[0];
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for w in v.windows(2).skip(1) {
        let a = w[0].sub(origin);
        let b = w[1].sub(origin);
        let tri = a.cross(b);
        area2 += tri;
        cx += tri * (a.x + b.x);
        cy += tri * (a.y + b.y);
    }
    if area2 <= 0.0 {
        return vertex_mean();
    }
    Point2D::new(origin.x + cx / (3.0 * area2), origin.y + cy / (3.0 * area2))
}

fn distance_to_segment(p: Point2D, a: Point2D, b: Point2D) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a.add(ab.scale(t)))
}

/// Inside or within `eps` of the boundary.
pub fn contains_point_2d(poly: &ConvexPolygon2D, p: Point2D, eps: f64) -> bool {
    let v = &poly.vertices;
    match v.len() {
        0 => false,
        1 => p.distance(v[0]) <= eps,
        2 => distance_to_segment(p, v[0], v[1]) <= eps,
        n => (0..n).all(|i| orient(v[i], v[(i + 1) % n], p) >= -eps),
    }
}

/// Closed half-plane `{x : cross(dir, x - origin) >= -eps}`.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    origin: Point2D,
    dir: Point2D,
}

impl HalfPlane {
    fn side(&self, p: Point2D) -> f64 {
        self.dir.cross(p.sub(self.origin))
    }
}

fn bounding_half_planes(poly: &ConvexPolygon2D) -> Vec<HalfPlane> {
    let v = &poly.vertices;
    match v.len() {
        0 => Vec::new(),
        1 => {
            let p = v[0];
            [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
                .into_iter()
                .map(|(x, y)| HalfPlane { origin: p, dir: Point2D::new(x, y) })
                .collect()
        }
        2 => {
            let (a, b) = (v[0], v[1]);
            let u = b.sub(a);
            // cross((u.y, -u.x), w) == dot(u, w): the end caps
            vec![
                HalfPlane { origin: a, dir: u },
                HalfPlane { origin: b, dir: u.scale(-1.0) },
                HalfPlane { origin: a, dir: Point2D::new(u.y, -u.x) },
                HalfPlane { origin: b, dir: Point2D::new(-u.y, u.x) },
            ]
        }
        n => (0..n).map(|i| HalfPlane { origin: v[i], dir: v[(i + 1) % n].sub(v[i]) }).collect(),
    }
}

fn clip_ring(ring: &[Point2D], plane: HalfPlane) -> Vec<Point2D> {
    let n = ring.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = ring[i];
        let next = ring[(i + 1) % n];
        let s_cur = plane.side(cur);
        let s_next = plane.side(next);
        let cur_in = s_cur >= -ORIENT_EPS;
        let next_in = s_next >= -ORIENT_EPS;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let t = s_cur / (s_cur - s_next);
            out.push(cur.add(next.sub(cur).scale(t)));
        }
    }
    out
}

/// Intersection of two convex polygons by successive half-plane clipping of
/// `a` against the boundary of `b`.
pub fn convex_intersection(a: &ConvexPolygon2D, b: &ConvexPolygon2D) -> ConvexPolygon2D {
    if a.is_empty() || b.is_empty() {
        return ConvexPolygon2D::empty();
    }
    if a == b {
        return a.clone();
    }
    let mut ring = a.vertices.clone();
    for plane in bounding_half_planes(b) {
        ring = clip_ring(&ring, plane);
        if ring.is_empty() {
            return ConvexPolygon2D::empty();
        }
    }
    // re-canonicalize: clipping can leave duplicate or collinear vertices
    convex_hull_2d(&ring).unwrap_or_default()
}
