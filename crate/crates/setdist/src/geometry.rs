//! Convex bodies in the plane, their support functions on a fixed angle
//! grid, and the half-plane clipping primitive used to build Voronoi cells.
//!
//! All operations are pure functions on immutable values.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Vertices closer than this (in window units) are merged after clipping;
/// Sutherland–Hodgman emits duplicates at tangential cuts.
pub const MERGE_EPS: f64 = 1e-9;

/// A planar point. Serialized as a `[x, y]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product `self × other`.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

impl From<Point> for (f64, f64) {
    fn from(p: Point) -> Self {
        (p.x, p.y)
    }
}

/// The `n` evaluation directions `u_i = 2πi/n`, `i = 0..n-1`.
///
/// The grid is fully determined by `n`, so two vectors are "on the same
/// grid" exactly when their lengths agree.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    angles: Vec<f64>,
    directions: Vec<Point>,
}

impl AngleGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let angles: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let directions = angles
            .iter()
            .map(|&a| Point::new(a.cos(), a.sin()))
            .collect();
        Ok(AngleGrid { angles, directions })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn directions(&self) -> &[Point] {
        &self.directions
    }
}

/// Support function values `h(A, u_i)` sampled on an [`AngleGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportVector {
    values: Vec<f64>,
}

impl SupportVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(SupportVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A disc grain: the primitive shape of the germ-grain processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !center.is_finite() || !radius.is_finite() {
            return Err(Error::NonFinite);
        }
        if radius <= 0.0 {
            return Err(Error::InvalidProcess(format!(
                "disc radius must be positive, got {radius}"
            )));
        }
        Ok(Disc { center, radius })
    }

    pub fn contains(&self, p: Point) -> bool {
        p.dist(self.center) <= self.radius
    }
}

/// A convex polygon with vertices in counter-clockwise order.
///
/// Degenerate bodies (a single point, a segment) are legal values: tiny
/// Voronoi cells clipped by discs can degenerate numerically, and support
/// functions remain well defined for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct ConvexBody {
    vertices: Vec<Point>,
}

impl ConvexBody {
    /// Build a body from vertices in counter-clockwise order.
    ///
    /// Near-duplicate vertices (within [`MERGE_EPS`]) are merged; a ring of
    /// collinear points collapses to a segment. Returns `Error::EmptyBody`
    /// for an empty list and `Error::NotConvex` if any turn is clockwise.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyBody);
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let verts = canonicalize(vertices);
        if verts.len() >= 3 {
            let scale = verts
                .iter()
                .map(|v| v.x.abs().max(v.y.abs()))
                .fold(1.0, f64::max);
            let tol = MERGE_EPS * scale * scale;
            let n = verts.len();
            for i in 0..n {
                let a = verts[i];
                let b = verts[(i + 1) % n];
                let c = verts[(i + 2) % n];
                if (b - a).cross(c - b) < -tol {
                    return Err(Error::NotConvex);
                }
            }
        }
        Ok(ConvexBody { vertices: verts })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn translated(&self, v: Point) -> ConvexBody {
        ConvexBody {
            vertices: self.vertices.iter().map(|&p| p + v).collect(),
        }
    }

    /// Shoelace area; 0 for degenerate bodies.
    pub fn area(&self) -> f64 {
        if self.vertices.len() < 3 {
            return 0.0;
        }
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.vertices[i].cross(self.vertices[(i + 1) % n]);
        }
        acc / 2.0
    }

    /// Area-weighted centroid, falling back to the vertex mean when the
    /// body is degenerate.
    pub fn centroid(&self) -> Point {
        let a = self.area();
        if a.abs() < 1e-12 {
            let n = self.vertices.len() as f64;
            let mut s = Point::new(0.0, 0.0);
            for &v in &self.vertices {
                s = s + v;
            }
            return s * (1.0 / n);
        }
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Whether `p` lies in the body, within tolerance `tol` of the boundary.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self.vertices.len() {
            1 => self.vertices[0].dist(p) <= tol,
            2 => dist_to_segment(p, self.vertices[0], self.vertices[1]) <= tol,
            _ => {
                let n = self.vertices.len();
                (0..n).all(|i| {
                    let a = self.vertices[i];
                    let b = self.vertices[(i + 1) % n];
                    (b - a).cross(p - a) >= -tol * (b - a).norm().max(1.0)
                })
            }
        }
    }
}

impl TryFrom<Vec<Point>> for ConvexBody {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        ConvexBody::new(v)
    }
}

impl From<ConvexBody> for Vec<Point> {
    fn from(b: ConvexBody) -> Self {
        b.vertices
    }
}

fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Merge cyclically adjacent near-duplicate vertices and collapse fully
/// collinear rings to their extreme segment.
fn canonicalize(vertices: Vec<Point>) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(vertices.len());
    for v in vertices {
        if out.last().is_none_or(|&last| last.dist(v) > MERGE_EPS) {
            out.push(v);
        }
    }
    while out.len() > 1 && out[0].dist(*out.last().unwrap()) <= MERGE_EPS {
        out.pop();
    }
    if out.len() >= 3 {
        let scale = out
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(1.0, f64::max);
        let tol = MERGE_EPS * scale * scale;
        let n = out.len();
        let collinear = (0..n).all(|i| {
            let a = out[i];
            let b = out[(i + 1) % n];
            let c = out[(i + 2) % n];
            (b - a).cross(c - b).abs() <= tol
        });
        if collinear {
            // All points lie on one line: keep the two extremes.
            let d = out[1] - out[0];
            let lo = out
                .iter()
                .copied()
                .min_by(|a, b| a.dot(d).total_cmp(&b.dot(d)))
                .unwrap();
            let hi = out
                .iter()
                .copied()
                .max_by(|a, b| a.dot(d).total_cmp(&b.dot(d)))
                .unwrap();
            out = if lo.dist(hi) <= MERGE_EPS {
                vec![lo]
            } else {
                vec![lo, hi]
            };
        }
    }
    out
}

/// Support function of a polygon on the grid: `h(A, u) = max_v <u, v>`.
///
/// The supremum of a linear functional over a polygon is attained at a
/// vertex, so the values are exact.
pub fn support_polygon(body: &ConvexBody, grid: &AngleGrid) -> SupportVector {
    let values = grid
        .directions()
        .iter()
        .map(|&u| {
            body.vertices()
                .iter()
                .map(|&v| u.dot(v))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    SupportVector { values }
}

/// Support function of a disc: `h(D, u) = <center, u> + radius`.
pub fn support_disc(d: &Disc, grid: &AngleGrid) -> SupportVector {
    let values = grid
        .directions()
        .iter()
        .map(|&u| d.center.dot(u) + d.radius)
        .collect();
    SupportVector { values }
}

/// Grid approximation of the Hausdorff distance between two convex bodies:
/// `max_i |h(A,u_i) - h(B,u_i)|`, the discretization of
/// `sup_u |h(A,u) - h(B,u)|` over the unit circle.
pub fn hausdorff_grid(a: &SupportVector, b: &SupportVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::GridMismatch(a.dim(), b.dim()));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Intersect `body` with the half-plane `{x : <x - point_on_line, inward_normal> >= 0}`.
///
/// One Sutherland–Hodgman step. Vertex order stays counter-clockwise; an
/// empty intersection is `None`, not an error.
pub fn clip_halfplane(
    body: &ConvexBody,
    point_on_line: Point,
    inward_normal: Point,
) -> Option<ConvexBody> {
    clip_tagged(
        &body
            .vertices()
            .iter()
            .map(|&v| (v, usize::MAX))
            .collect::<Vec<_>>(),
        point_on_line,
        inward_normal,
        usize::MAX,
    )
    .map(|tagged| {
        let verts = canonicalize(tagged.into_iter().map(|(v, _)| v).collect());
        ConvexBody { vertices: verts }
    })
    .filter(|b| !b.vertices.is_empty())
}

/// Sutherland–Hodgman step on a polygon whose edges carry provenance tags.
///
/// Entry `k` holds vertex `k` and the tag of the edge from vertex `k` to
/// vertex `k+1`. Edges created on the cut line get `new_tag`; surviving
/// fragments keep their tag. The tessellation builder uses the tags to
/// recover which bisector contributed each cell edge.
pub(crate) fn clip_tagged(
    poly: &[(Point, usize)],
    point_on_line: Point,
    inward_normal: Point,
    new_tag: usize,
) -> Option<Vec<(Point, usize)>> {
    assert!(
        inward_normal.norm() > 0.0,
        "clip half-plane normal must be nonzero"
    );
    if poly.is_empty() {
        return None;
    }
    if poly.len() == 1 {
        let d = (poly[0].0 - point_on_line).dot(inward_normal);
        return if d >= 0.0 { Some(poly.to_vec()) } else { None };
    }
    let n = poly.len();
    let mut out: Vec<(Point, usize)> = Vec::with_capacity(n + 2);
    for i in 0..n {
        let (a, tag) = poly[i];
        let (b, _) = poly[(i + 1) % n];
        let da = (a - point_on_line).dot(inward_normal);
        let db = (b - point_on_line).dot(inward_normal);
        if da >= 0.0 {
            out.push((a, tag));
            if db < 0.0 {
                // Leaving the half-plane: the exit point starts the cut edge.
                let t = da / (da - db);
                out.push((a + (b - a) * t, new_tag));
            }
        } else if db >= 0.0 {
            // Entering: the entry point continues the original edge.
            let t = da / (da - db);
            out.push((a + (b - a) * t, tag));
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Regular `k`-gon inscribed in the disc, vertex 0 at angle 0.
pub fn disc_to_polygon(d: &Disc, k: usize) -> Result<ConvexBody> {
    if k < 3 {
        return Err(Error::DiscPolygonTooCoarse(k));
    }
    let vertices = (0..k)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / k as f64;
            Point::new(d.center.x + d.radius * a.cos(), d.center.y + d.radius * a.sin())
        })
        .collect();
    Ok(ConvexBody { vertices })
}

/// Axis-aligned rectangle as a CCW body.
pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexBody {
    ConvexBody {
        vertices: vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ],
    }
}
