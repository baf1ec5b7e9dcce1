//! Planar convex geometry: points, lines in Hesse normal form, segments and
//! convex polygons with the clipping, splitting and set-covariance routines
//! the simulator and the estimators are built on.
//!
//! Conventions
//! - Lines are `{x : x·(cos φ, sin φ) = p}` with `φ ∈ [0, π)` and `p ∈ ℝ`.
//! - Polygons are stored counterclockwise. Side `i` runs from vertex `i` to
//!   vertex `i + 1 (mod n)`.
//! - A single tolerance [`EPS`] (window units) decides tangency and degeneracy.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Module-wide tolerance for tangency and degeneracy tests.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate in input")]
    NonFinite,
    #[error("polygon has zero or negative area")]
    Degenerate,
    #[error("polygon is not convex at vertex {0}")]
    NonConvex(usize),
    #[error("line does not meet the polygon interior")]
    LineMissesInterior,
    #[error("line passes within tolerance of a polygon vertex")]
    VertexOnLine,
    #[error("distance {r} outside [0, {max}]")]
    DistanceOutOfRange { r: f64, max: f64 },
}

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `theta`.
    #[inline]
    pub fn unit(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn lerp(self, o: Point, s: f64) -> Point {
        self + (o - self) * s
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Reduce an angle to `[0, π)`.
#[inline]
pub fn reduce_half_turn(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Line `{x : x·(cos φ, sin φ) = p}` with normal angle `φ ∈ [0, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineP {
    pub phi: f64,
    pub p: f64,
}

impl LineP {
    /// Builds a line from any normal angle; the angle is folded into `[0, π)`
    /// and the offset negated when the fold flips the normal.
    pub fn new(phi: f64, p: f64) -> Self {
        let turns = (phi / PI).floor();
        let mut reduced = phi - turns * PI;
        let mut p = if (turns as i64).rem_euclid(2) == 0 { p } else { -p };
        if reduced >= PI {
            reduced -= PI;
            p = -p;
        }
        Self { phi: reduced, p }
    }

    /// Line through `a` and `b` (`a ≠ b`).
    pub fn through(a: Point, b: Point) -> Self {
        let d = b - a;
        let normal_angle = d.y.atan2(d.x) + PI / 2.0;
        let n = Point::unit(normal_angle);
        Self::new(normal_angle, n.dot(a))
    }

    #[inline]
    pub fn normal(&self) -> Point {
        Point::unit(self.phi)
    }

    #[inline]
    pub fn direction(&self) -> Point {
        let n = self.normal();
        Point::new(-n.y, n.x)
    }

    #[inline]
    pub fn signed_distance(&self, q: Point) -> f64 {
        q.dot(self.normal()) - self.p
    }

    /// Point at arc-length coordinate `s` measured from the foot of the
    /// perpendicular through the origin.
    #[inline]
    pub fn point_at(&self, s: f64) -> Point {
        self.normal() * self.p + self.direction() * s
    }

    /// Arc-length coordinate of the orthogonal projection of `q`.
    #[inline]
    pub fn coordinate_of(&self, q: Point) -> f64 {
        q.dot(self.direction())
    }

    /// Intersection with another line, `None` if (near-)parallel.
    pub fn intersect(&self, other: &LineP) -> Option<Point> {
        let n1 = self.normal();
        let n2 = other.normal();
        let det = n1.cross(n2);
        if det.abs() < 1e-14 {
            return None;
        }
        let x = (self.p * n2.y - other.p * n1.y) / det;
        let y = (n1.x * other.p - n2.x * self.p) / det;
        Some(Point::new(x, y))
    }
}

/// Closed line segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    #[inline]
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    #[inline]
    pub fn midpoint(&self) -> Point {
        self.a.lerp(self.b, 0.5)
    }

    #[inline]
    pub fn point_at(&self, s: f64) -> Point {
        self.a.lerp(self.b, s)
    }

    /// Direction angle of `b - a` folded into `[0, π)`.
    pub fn direction_angle(&self) -> f64 {
        let d = self.b - self.a;
        reduce_half_turn(d.y.atan2(d.x))
    }

    /// Length of the projection onto the unit normal at angle `phi`.
    #[inline]
    pub fn width(&self, phi: f64) -> f64 {
        (self.b - self.a).dot(Point::unit(phi)).abs()
    }

    /// Parameter `s ∈ (0, 1)` where the segment crosses `line`, if it does
    /// so transversally away from both ends.
    pub fn crossing_parameter(&self, line: &LineP) -> Option<f64> {
        let da = line.signed_distance(self.a);
        let db = line.signed_distance(self.b);
        if (da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0) {
            let s = da / (da - db);
            Some(s)
        } else {
            None
        }
    }

    /// True iff the two segments cross at a point interior to both.
    pub fn crosses(&self, other: &Segment) -> bool {
        let d1 = (self.b - self.a).cross(other.a - self.a);
        let d2 = (self.b - self.a).cross(other.b - self.a);
        let d3 = (other.b - other.a).cross(self.a - other.a);
        let d4 = (other.b - other.a).cross(self.b - other.a);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }

    /// Euclidean distance from `q` to the segment.
    pub fn distance_to(&self, q: Point) -> f64 {
        let d = self.b - self.a;
        let l2 = d.dot(d);
        if l2 == 0.0 {
            return q.dist(self.a);
        }
        let s = ((q - self.a).dot(d) / l2).clamp(0.0, 1.0);
        q.dist(self.point_at(s))
    }

    /// Length of the part of the segment inside the closed disk `B(c, r)`.
    pub fn length_in_disk(&self, c: Point, r: f64) -> f64 {
        let d = self.b - self.a;
        let len = d.norm();
        if len == 0.0 || r <= 0.0 {
            return 0.0;
        }
        let u = d * (1.0 / len);
        let w = self.a - c;
        let proj = w.dot(u);
        let perp2 = w.dot(w) - proj * proj;
        let h2 = r * r - perp2;
        if h2 <= 0.0 {
            return 0.0;
        }
        let h = h2.sqrt();
        let lo = (-proj - h).max(0.0);
        let hi = (-proj + h).min(len);
        (hi - lo).max(0.0)
    }
}

/// Convex polygon with counterclockwise vertices and non-empty interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for ConvexPolygon {
    type Error = GeometryError;
    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        ConvexPolygon::new(v)
    }
}

impl From<ConvexPolygon> for Vec<Point> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

/// Result of cutting a polygon by a line: the chord enters side `enter_side`
/// at `enter` and leaves through side `exit_side` at `exit`. The positive
/// side of the line lies to the right when walking from `enter` to `exit`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Crossing {
    /// Side on which the boundary passes from the positive to the negative
    /// half-plane.
    pub pos_to_neg: usize,
    pub p: Point,
    /// Side on which the boundary passes from negative back to positive.
    pub neg_to_pos: usize,
    pub q: Point,
}

impl ConvexPolygon {
    /// Validates and builds a polygon. Clockwise input is reversed;
    /// non-convex input is rejected.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let area = shoelace(&vertices);
        let scale = bbox_diameter(&vertices);
        if !(area > EPS * scale * scale) {
            if area < -EPS * scale * scale {
                vertices.reverse();
            } else {
                return Err(GeometryError::Degenerate);
            }
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -EPS * scale * scale {
                return Err(GeometryError::NonConvex((i + 1) % n));
            }
        }
        Ok(Self { vertices })
    }

    /// Builds a polygon without validation. Callers guarantee convexity and
    /// counterclockwise order.
    pub(crate) fn from_vertices_unchecked(vertices: Vec<Point>) -> Self {
        debug_assert!(vertices.len() >= 3);
        Self { vertices }
    }

    /// Convex hull of a point set (monotone chain).
    pub fn hull(points: &[Point]) -> Result<Self, GeometryError> {
        let mut pts: Vec<Point> = points.to_vec();
        if pts.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Err(GeometryError::TooFewVertices(pts.len()));
        }
        let mut h: Vec<Point> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = h.len();
            let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
                Box::new(pts.iter())
            } else {
                Box::new(pts.iter().rev())
            };
            for &p in iter {
                while h.len() >= start + 2 && (h[h.len() - 1] - h[h.len() - 2]).cross(p - h[h.len() - 2]) <= 0.0 {
                    h.pop();
                }
                h.push(p);
            }
            h.pop();
        }
        Self::new(h)
    }

    /// Axis-parallel rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).expect("unit square")
    }

    /// Square of side `side` centred at `c`.
    pub fn centered_square(c: Point, side: f64) -> Result<Self, GeometryError> {
        let h = side / 2.0;
        Self::rectangle(c.x - h, c.y - h, c.x + h, c.y + h)
    }

    /// Regular `n`-gon inscribed in the circle of radius `radius` about `c`.
    pub fn regular(n: usize, radius: f64, c: Point) -> Result<Self, GeometryError> {
        let vertices = (0..n)
            .map(|k| c + Point::unit(2.0 * PI * k as f64 / n as f64) * radius)
            .collect();
        Self::new(vertices)
    }

    #[inline]
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn side(&self, i: usize) -> Segment {
        let n = self.vertices.len();
        Segment::new(self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn sides(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.vertices.len()).map(move |i| self.side(i))
    }

    pub fn area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.sides().map(|s| s.length()).sum()
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut a = 0.0;
        let mut c = Point::default();
        let o = self.vertices[0];
        for i in 0..n {
            let p = self.vertices[i] - o;
            let q = self.vertices[(i + 1) % n] - o;
            let w = p.cross(q);
            a += w;
            c = c + (p + q) * w;
        }
        o + c * (1.0 / (3.0 * a))
    }

    /// `(min, max)` of `v·u` over the vertices.
    #[inline]
    pub fn support(&self, u: Point) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.vertices {
            let s = v.dot(u);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }

    /// Width in normal direction `phi`.
    #[inline]
    pub fn width(&self, phi: f64) -> f64 {
        let (lo, hi) = self.support(Point::unit(phi));
        hi - lo
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    /// A covering disk: centre at the vertex mean, radius the largest
    /// vertex distance from it.
    pub fn bounding_disk(&self) -> (Point, f64) {
        let n = self.vertices.len() as f64;
        let c = self
            .vertices
            .iter()
            .fold(Point::default(), |acc, v| acc + *v)
            * (1.0 / n);
        let r = self.vertices.iter().map(|v| v.dist(c)).fold(0.0, f64::max);
        (c, r)
    }

    /// Strict interior membership with margin `tol`.
    pub fn contains_strict(&self, q: Point, tol: f64) -> bool {
        self.sides().all(|s| {
            let d = s.b - s.a;
            d.cross(q - s.a) / d.norm() > tol
        })
    }

    /// Closed membership with slack `tol`.
    pub fn contains(&self, q: Point, tol: f64) -> bool {
        self.sides().all(|s| {
            let d = s.b - s.a;
            d.cross(q - s.a) / d.norm() >= -tol
        })
    }

    /// True if every vertex of `other` lies in `self` (up to `tol`).
    pub fn contains_polygon(&self, other: &ConvexPolygon, tol: f64) -> bool {
        other.vertices.iter().all(|v| self.contains(*v, tol))
    }

    pub fn translate(&self, by: Point) -> Self {
        Self::from_vertices_unchecked(self.vertices.iter().map(|v| *v + by).collect())
    }

    /// Dilation about the origin by `s > 0`.
    pub fn scale(&self, s: f64) -> Self {
        Self::from_vertices_unchecked(self.vertices.iter().map(|v| *v * s).collect())
    }

    /// Chord `line ∩ self` via parametric clipping; `None` when the line
    /// misses the interior or only touches the boundary.
    pub fn clip_line(&self, line: &LineP) -> Option<Segment> {
        let o = line.normal() * line.p;
        let d = line.direction();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for s in self.sides() {
            // inside: cross(edge, x - a) >= 0
            let e = s.b - s.a;
            let num = e.cross(o - s.a);
            let den = e.cross(d);
            if den.abs() <= 1e-15 * e.norm() {
                // parallel to this side: outside, or running along it
                if num <= EPS * e.norm() {
                    return None;
                }
                continue;
            }
            let s0 = -num / den;
            if den > 0.0 {
                lo = lo.max(s0);
            } else {
                hi = hi.min(s0);
            }
        }
        if hi - lo > EPS {
            Some(Segment::new(o + d * lo, o + d * hi))
        } else {
            None
        }
    }

    /// Clips a segment to the polygon. Returns the clipped piece and, for
    /// each end, the index of the polygon side that cut it (`None` when the
    /// original endpoint survived).
    pub fn clip_segment(&self, seg: &Segment) -> Option<(Segment, [Option<usize>; 2])> {
        let d = seg.b - seg.a;
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut lo_side = None;
        let mut hi_side = None;
        for (i, s) in self.sides().enumerate() {
            let e = s.b - s.a;
            let num = e.cross(seg.a - s.a);
            let den = e.cross(d);
            if den.abs() < 1e-300 {
                if num < 0.0 {
                    return None;
                }
                continue;
            }
            let s0 = -num / den;
            if den > 0.0 {
                if s0 > lo {
                    lo = s0;
                    lo_side = Some(i);
                }
            } else if s0 < hi {
                hi = s0;
                hi_side = Some(i);
            }
        }
        if (hi - lo) * d.norm() > EPS {
            Some((
                Segment::new(seg.point_at(lo), seg.point_at(hi)),
                [lo_side, hi_side],
            ))
        } else {
            None
        }
    }

    /// Locates the transversal crossing of `line`. Fails when the line misses
    /// the interior or passes within tolerance of a vertex.
    pub(crate) fn crossing(&self, line: &LineP) -> Result<Crossing, GeometryError> {
        let n = self.vertices.len();
        let nrm = line.normal();
        let mut dist = Vec::with_capacity(n);
        let mut any_pos = false;
        let mut any_neg = false;
        for v in &self.vertices {
            let d = v.dot(nrm) - line.p;
            if d.abs() <= EPS {
                return Err(GeometryError::VertexOnLine);
            }
            any_pos |= d > 0.0;
            any_neg |= d < 0.0;
            dist.push(d);
        }
        if !(any_pos && any_neg) {
            return Err(GeometryError::LineMissesInterior);
        }
        let mut pos_to_neg = None;
        let mut neg_to_pos = None;
        for i in 0..n {
            let j = (i + 1) % n;
            if dist[i] > 0.0 && dist[j] < 0.0 {
                pos_to_neg = Some(i);
            } else if dist[i] < 0.0 && dist[j] > 0.0 {
                neg_to_pos = Some(i);
            }
        }
        let (i, k) = match (pos_to_neg, neg_to_pos) {
            (Some(i), Some(k)) => (i, k),
            _ => return Err(GeometryError::LineMissesInterior),
        };
        let at = |s: usize| {
            let a = self.vertices[s];
            let b = self.vertices[(s + 1) % n];
            let ds = dist[s];
            let de = dist[(s + 1) % n];
            a.lerp(b, ds / (ds - de))
        };
        Ok(Crossing {
            pos_to_neg: i,
            p: at(i),
            neg_to_pos: k,
            q: at(k),
        })
    }

    /// Vertex lists of the two parts of a split along `c`: the part on the
    /// positive side of the line first. Side `m` of each returned list maps
    /// back to an original side index (or `None` for the chord) through the
    /// accompanying vectors.
    pub(crate) fn split_at(&self, c: &Crossing) -> SplitParts {
        let n = self.vertices.len();
        // negative part: P, v_{i+1}, ..., v_k, Q, chord Q -> P
        let mut neg = vec![c.p];
        let mut neg_sides = vec![Some(c.pos_to_neg)];
        let mut s = (c.pos_to_neg + 1) % n;
        loop {
            neg.push(self.vertices[s]);
            if s == c.neg_to_pos {
                neg_sides.push(Some(s));
                break;
            }
            neg_sides.push(Some(s));
            s = (s + 1) % n;
        }
        neg.push(c.q);
        neg_sides.push(None);
        // positive part: Q, v_{k+1}, ..., v_i, P, chord P -> Q
        let mut pos = vec![c.q];
        let mut pos_sides = vec![Some(c.neg_to_pos)];
        let mut s = (c.neg_to_pos + 1) % n;
        loop {
            pos.push(self.vertices[s]);
            pos_sides.push(Some(s));
            if s == c.pos_to_neg {
                break;
            }
            s = (s + 1) % n;
        }
        pos.push(c.p);
        pos_sides.push(None);
        SplitParts {
            positive: (ConvexPolygon::from_vertices_unchecked(pos), pos_sides),
            negative: (ConvexPolygon::from_vertices_unchecked(neg), neg_sides),
        }
    }

    /// Splits along `line` into the parts on its positive and negative side.
    pub fn split(&self, line: &LineP) -> Result<(ConvexPolygon, ConvexPolygon), GeometryError> {
        match self.crossing(line) {
            Ok(c) => {
                let parts = self.split_at(&c);
                Ok((parts.positive.0, parts.negative.0))
            }
            Err(GeometryError::VertexOnLine) => {
                // line through a vertex: cut both closed half-planes
                let n = line.normal();
                let pos = self.clip_half_plane(-n, -line.p);
                let neg = self.clip_half_plane(n, line.p);
                match (pos, neg) {
                    (Some(a), Some(b)) => Ok((a, b)),
                    _ => Err(GeometryError::LineMissesInterior),
                }
            }
            Err(e) => Err(e),
        }
    }

    /// Intersection with the closed half-plane `{x : n·x <= c}`.
    pub fn clip_half_plane(&self, n: Point, c: f64) -> Option<ConvexPolygon> {
        let verts = clip_ring(&self.vertices, n, c);
        finish_ring(verts)
    }

    /// Intersection with another convex polygon.
    pub fn intersection(&self, other: &ConvexPolygon) -> Option<ConvexPolygon> {
        let mut ring = self.vertices.clone();
        for s in other.sides() {
            let e = s.b - s.a;
            // inside of `other`: cross(e, x - a) >= 0  <=>  n·x <= n·a with n = (e.y, -e.x)
            let n = Point::new(e.y, -e.x);
            ring = clip_ring(&ring, n, n.dot(s.a));
            if ring.len() < 3 {
                return None;
            }
        }
        finish_ring(ring)
    }

    /// Area of `self ∩ other`, zero when empty.
    pub fn intersection_area(&self, other: &ConvexPolygon) -> f64 {
        self.intersection(other).map_or(0.0, |p| p.area())
    }

    /// Inner parallel body `{x : B(x, d) ⊆ self}`.
    pub fn erode(&self, d: f64) -> Option<ConvexPolygon> {
        let mut ring = self.vertices.clone();
        for s in self.sides() {
            let e = s.b - s.a;
            let len = e.norm();
            let n = Point::new(e.y / len, -e.x / len);
            ring = clip_ring(&ring, n, n.dot(s.a) - d);
            if ring.len() < 3 {
                return None;
            }
        }
        finish_ring(ring)
    }
}

pub(crate) struct SplitParts {
    pub positive: (ConvexPolygon, Vec<Option<usize>>),
    pub negative: (ConvexPolygon, Vec<Option<usize>>),
}

fn clip_ring(ring: &[Point], n: Point, c: f64) -> Vec<Point> {
    let m = ring.len();
    let mut out = Vec::with_capacity(m + 1);
    for i in 0..m {
        let a = ring[i];
        let b = ring[(i + 1) % m];
        let da = snap(n.dot(a) - c, n);
        let db = snap(n.dot(b) - c, n);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            out.push(a.lerp(b, da / (da - db)));
        }
    }
    out
}

#[inline]
fn snap(d: f64, n: Point) -> f64 {
    if d.abs() <= EPS * n.norm() {
        0.0
    } else {
        d
    }
}

fn finish_ring(mut ring: Vec<Point>) -> Option<ConvexPolygon> {
    ring.dedup_by(|a, b| a.dist(*b) <= EPS);
    while ring.len() > 1 && ring[0].dist(*ring.last().unwrap()) <= EPS {
        ring.pop();
    }
    if ring.len() < 3 {
        return None;
    }
    let scale = bbox_diameter(&ring);
    if shoelace(&ring) <= EPS * scale * scale.max(1.0) {
        return None;
    }
    Some(ConvexPolygon::from_vertices_unchecked(ring))
}

fn shoelace(v: &[Point]) -> f64 {
    let n = v.len();
    let o = v[0];
    let mut s = 0.0;
    for i in 1..n.saturating_sub(1) {
        s += (v[i] - o).cross(v[i + 1] - o);
    }
    0.5 * s
}

fn bbox_diameter(v: &[Point]) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for p in v {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    (x1 - x0).hypot(y1 - y0)
}

/// Chord `line ∩ poly`, `None` on a miss or tangency.
pub fn clip_line(poly: &ConvexPolygon, line: &LineP) -> Option<Segment> {
    poly.clip_line(line)
}

/// Splits `poly` along `line`: `(positive side, negative side)`.
pub fn split_polygon(
    poly: &ConvexPolygon,
    line: &LineP,
) -> Result<(ConvexPolygon, ConvexPolygon), GeometryError> {
    poly.split(line)
}

pub fn width(poly: &ConvexPolygon, phi: f64) -> f64 {
    poly.width(phi)
}

/// `(perimeter, area)`.
pub fn perimeter_area(poly: &ConvexPolygon) -> (f64, f64) {
    (poly.perimeter(), poly.area())
}

/// Isotropized set covariance of the disk of radius `radius`:
/// `2R² arccos(r/2R) − (r/2)√(4R² − r²)` on `[0, 2R]`.
pub fn set_covariance_disk(radius: f64, r: f64) -> Result<f64, GeometryError> {
    let max = 2.0 * radius;
    if !(0.0..=max).contains(&r) {
        return Err(GeometryError::DistanceOutOfRange { r, max });
    }
    let rr = radius * radius;
    Ok(2.0 * rr * (r / max).acos() - 0.5 * r * (4.0 * rr - r * r).max(0.0).sqrt())
}

/// `∫ Area(W ∩ (W + r u)) ν(du)` by the midpoint rule over `n_angles`
/// equispaced directions of the half circle (the integrand is even in `u`).
pub fn isotropized_set_covariance(poly: &ConvexPolygon, r: f64, n_angles: usize) -> f64 {
    let n_angles = n_angles.max(4);
    if r <= 0.0 {
        return poly.area();
    }
    let mut acc = 0.0;
    for k in 0..n_angles {
        let theta = PI * (k as f64 + 0.5) / n_angles as f64;
        let shifted = poly.translate(Point::unit(theta) * r);
        acc += poly.intersection_area(&shifted);
    }
    acc / n_angles as f64
}

/// Tabulated `γ̄_W` on `[0, diam W]` with linear interpolation, for repeated
/// evaluation inside estimators and variance integrals.
#[derive(Clone, Debug)]
pub struct SetCovarianceTable {
    step: f64,
    values: Vec<f64>,
}

impl SetCovarianceTable {
    pub fn new(poly: &ConvexPolygon, n_r: usize, n_angles: usize) -> Self {
        let diam = poly.diameter();
        let n_r = n_r.max(2);
        let step = diam / (n_r - 1) as f64;
        let values = (0..n_r)
            .map(|i| {
                if i + 1 == n_r {
                    0.0
                } else {
                    isotropized_set_covariance(poly, i as f64 * step, n_angles)
                }
            })
            .collect();
        Self { step, values }
    }

    pub fn range(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.values[0];
        }
        let x = r / self.step;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return 0.0;
        }
        let f = x - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_scattered_points() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
            Point::new(1.0, 2.0),
        ];
        let h = ConvexPolygon::hull(&pts).unwrap();
        assert_eq!(h.len(), 4);
        assert!((h.area() - 4.0).abs() < 1e-15);
        assert!(ConvexPolygon::hull(&pts[..2]).is_err());
    }

    fn hexagon() -> ConvexPolygon {
        ConvexPolygon::regular(6, 1.0, Point::new(0.3, -0.2)).unwrap()
    }

    /// Brute-force chord: intersect the line with every side separately.
    fn brute_chord_length(poly: &ConvexPolygon, line: &LineP) -> f64 {
        let mut hits = Vec::new();
        for s in poly.sides() {
            if let Some(t) = s.crossing_parameter(line) {
                hits.push(s.point_at(t));
            }
        }
        assert_eq!(hits.len(), 2);
        hits[0].dist(hits[1])
    }

    #[test]
    fn clip_line_axis_chord_and_miss() {
        let sq = ConvexPolygon::unit_square();
        let chord = sq.clip_line(&LineP::new(0.0, 0.5)).unwrap();
        let (lo, hi) = if chord.a.y < chord.b.y {
            (chord.a, chord.b)
        } else {
            (chord.b, chord.a)
        };
        assert!(lo.dist(Point::new(0.5, 0.0)) < 1e-12);
        assert!(hi.dist(Point::new(0.5, 1.0)) < 1e-12);
        assert!(sq.clip_line(&LineP::new(0.0, 2.0)).is_none());
        // tangent along a side
        assert!(sq.clip_line(&LineP::new(0.0, 1.0)).is_none());
    }

    #[test]
    fn clip_line_hexagon_matches_brute_force() {
        let h = hexagon();
        let c = h.centroid();
        for k in 0..17 {
            let phi = k as f64 * 0.173;
            let line = LineP::new(phi, Point::unit(phi).dot(c) + 0.1 * (k as f64 - 8.0) / 8.0);
            let chord = h.clip_line(&line).unwrap();
            assert!((chord.length() - brute_chord_length(&h, &line)).abs() < 1e-12);
        }
        // through the centroid at phi = 0 the chord is 2 * apothem
        let line = LineP::new(0.0, c.x);
        let apothem = (PI / 6.0).cos();
        assert!((h.clip_line(&line).unwrap().length() - 2.0 * apothem).abs() < 1e-12);
    }

    #[test]
    fn line_normalisation() {
        let l = LineP::new(PI + 0.3, 0.7);
        assert!((l.phi - 0.3).abs() < 1e-15);
        assert!((l.p + 0.7).abs() < 1e-15);
        let l = LineP::new(-0.3, 0.2);
        assert!((l.phi - (PI - 0.3)).abs() < 1e-15);
        assert!((l.p + 0.2).abs() < 1e-15);
        let a = Point::new(0.2, 0.1);
        let b = Point::new(-0.5, 0.9);
        let t = LineP::through(a, b);
        assert!(t.signed_distance(a).abs() < 1e-14 && t.signed_distance(b).abs() < 1e-14);
        assert!((0.0..PI).contains(&t.phi));
    }

    #[test]
    fn split_square_halves() {
        let sq = ConvexPolygon::unit_square();
        let (a, b) = sq.split(&LineP::new(0.0, 0.5)).unwrap();
        assert!((a.area() - 0.5).abs() < 1e-12);
        assert!((b.area() - 0.5).abs() < 1e-12);
        assert!(a.vertices().iter().all(|v| v.x >= 0.5 - 1e-12));
        // diagonal-direction line through the centre
        let (a, b) = sq
            .split(&LineP::new(PI / 4.0, Point::unit(PI / 4.0).dot(Point::new(0.5, 0.5))))
            .unwrap();
        assert!((a.area() - b.area()).abs() < 1e-12);
    }

    #[test]
    fn split_missing_line_errors() {
        let sq = ConvexPolygon::unit_square();
        assert_eq!(
            sq.split(&LineP::new(0.0, 3.0)).unwrap_err(),
            GeometryError::LineMissesInterior
        );
    }

    #[test]
    fn width_examples() {
        let sq = ConvexPolygon::unit_square();
        assert!((sq.width(0.0) - 1.0).abs() < 1e-15);
        assert!((sq.width(PI / 4.0) - 2f64.sqrt()).abs() < 1e-15);
        let disk = ConvexPolygon::regular(64, 1.0, Point::default()).unwrap();
        for k in 0..10 {
            let w = disk.width(k as f64 * 0.31);
            assert!((w - 2.0).abs() / 2.0 < 0.005);
        }
    }

    #[test]
    fn perimeter_area_examples() {
        let (p, a) = perimeter_area(&ConvexPolygon::unit_square());
        assert_eq!((p, a), (4.0, 1.0));
        let c = ConvexPolygon::regular(256, 1.0, Point::default()).unwrap();
        let (p, a) = perimeter_area(&c);
        assert!((p - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
        assert!((a - PI).abs() / PI < 1e-3);
        let tri = ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        let (p, a) = perimeter_area(&tri);
        assert!((p - (2.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn polygon_validation() {
        assert!(matches!(
            ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices(2))
        ));
        let collinear = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
        ];
        assert_eq!(ConvexPolygon::new(collinear).unwrap_err(), GeometryError::Degenerate);
        let dart = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(0.5, 0.5),
            Point::new(0.0, 2.0),
        ];
        assert!(matches!(ConvexPolygon::new(dart), Err(GeometryError::NonConvex(_))));
        let cw = ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(cw.area() > 0.0);
        assert!(ConvexPolygon::new(vec![
            Point::new(f64::NAN, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0)
        ])
        .is_err());
    }

    #[test]
    fn polygon_json_literal() {
        let sq = ConvexPolygon::unit_square();
        let s = serde_json::to_string(&sq).unwrap();
        assert_eq!(s, "[[0.0,0.0],[1.0,0.0],[1.0,1.0],[0.0,1.0]]");
        let back: ConvexPolygon = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sq);
        assert!(serde_json::from_str::<ConvexPolygon>("[[0,0],[1,0]]").is_err());
    }

    #[test]
    fn disk_set_covariance_examples() {
        assert!((set_covariance_disk(1.0, 0.0).unwrap() - PI).abs() < 1e-14);
        assert!(set_covariance_disk(1.0, 2.0).unwrap().abs() < 1e-14);
        let v = set_covariance_disk(1.0, 1.0).unwrap();
        assert!((v - (2.0 * 0.5f64.acos() - 0.5 * 3f64.sqrt())).abs() < 1e-14);
        assert!(set_covariance_disk(1.0, -0.1).is_err());
        assert!(set_covariance_disk(1.0, 2.1).is_err());
    }

    /// Monte Carlo area of two unit disks at distance 1: points uniform in
    /// the bounding box of the first disk, counted when inside both.
    #[test]
    fn disk_set_covariance_matches_mc_lens_area() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            if x * x + y * y <= 1.0 && (x - 1.0) * (x - 1.0) + y * y <= 1.0 {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let est = 4.0 * p;
        let se = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        let exact = set_covariance_disk(1.0, 1.0).unwrap();
        assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact} (se {se})");
    }

    #[test]
    fn isotropized_set_covariance_limits() {
        let sq = ConvexPolygon::unit_square();
        assert!((isotropized_set_covariance(&sq, 0.0, 64) - 1.0).abs() < 1e-15);
        assert_eq!(isotropized_set_covariance(&sq, 1.5, 64), 0.0);
        let h = hexagon();
        assert!((isotropized_set_covariance(&h, 0.0, 8) - h.area()).abs() < 1e-12);
        assert_eq!(isotropized_set_covariance(&h, h.diameter() + 1e-6, 64), 0.0);
        // unit square closed form on [0, 1]: 1 - 4r/π + r²/π
        for r in [0.1, 0.5, 0.9] {
            let exact = 1.0 - 4.0 * r / PI + r * r / PI;
            assert!((isotropized_set_covariance(&sq, r, 2048) - exact).abs() < 1e-6);
        }
    }

    /// MC oracle: random direction and random point of W, counted if the
    /// point shifted by r·u is also in W.
    #[test]
    fn isotropized_set_covariance_matches_mc() {
        use rand::{Rng, SeedableRng};
        let sq = ConvexPolygon::unit_square();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let r = 0.5;
        let mut hits = 0usize;
        for _ in 0..n {
            let th: f64 = rng.random_range(0.0..2.0 * PI);
            let x = Point::new(rng.random(), rng.random());
            if sq.contains(x + Point::unit(th) * r, 0.0) {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let v = isotropized_set_covariance(&sq, r, 512);
        assert!((v - p).abs() < 3.0 * se);
    }

    #[test]
    fn set_covariance_table_interpolates() {
        let sq = ConvexPolygon::unit_square();
        let t = SetCovarianceTable::new(&sq, 301, 256);
        for r in [0.0, 0.123, 0.5, 0.77] {
            let exact = 1.0 - 4.0 * r / PI + r * r / PI;
            assert!((t.eval(r) - exact).abs() < 1e-4);
        }
        assert_eq!(t.eval(2.0), 0.0);
    }

    #[test]
    fn segment_helpers() {
        let s = Segment::new(Point::new(-1.0, 0.0), Point::new(1.0, 0.0));
        assert!((s.length_in_disk(Point::new(0.0, 0.0), 0.5) - 1.0).abs() < 1e-15);
        assert!((s.length_in_disk(Point::new(0.0, 0.3), 0.5) - 0.8).abs() < 1e-12);
        assert_eq!(s.length_in_disk(Point::new(0.0, 0.6), 0.5), 0.0);
        assert!((s.length_in_disk(Point::new(1.0, 0.0), 0.5) - 0.5).abs() < 1e-15);
        let t = Segment::new(Point::new(0.0, -1.0), Point::new(0.0, 1.0));
        assert!(s.crosses(&t));
        let u = Segment::new(Point::new(2.0, -1.0), Point::new(2.0, 1.0));
        assert!(!s.crosses(&u));
    }

    #[test]
    fn intersection_and_erosion() {
        let a = ConvexPolygon::unit_square();
        let b = a.translate(Point::new(0.5, 0.25));
        assert!((a.intersection_area(&b) - 0.375).abs() < 1e-14);
        assert_eq!(a.intersection_area(&a.translate(Point::new(2.0, 0.0))), 0.0);
        let e = a.erode(0.1).unwrap();
        assert!((e.area() - 0.64).abs() < 1e-14);
        assert!(a.erode(0.6).is_none());
        let (clip, sides) = a
            .clip_segment(&Segment::new(Point::new(-1.0, 0.5), Point::new(0.5, 0.5)))
            .unwrap();
        assert!(clip.a.dist(Point::new(0.0, 0.5)) < 1e-15);
        assert_eq!(sides, [Some(3), None]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_polygon() -> impl Strategy<Value = ConvexPolygon> {
            (3usize..12, 0.2f64..3.0, -2.0f64..2.0, -2.0f64..2.0, proptest::collection::vec(0.0f64..1.0, 12))
                .prop_map(|(n, r, cx, cy, jitter)| {
                    let mut angles: Vec<f64> =
                        (0..n).map(|k| (k as f64 + 0.8 * jitter[k]) * 2.0 * PI / n as f64).collect();
                    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let v = angles
                        .iter()
                        .map(|a| Point::new(cx, cy) + Point::unit(*a) * r)
                        .collect();
                    ConvexPolygon::new(v).unwrap()
                })
        }

        proptest! {
            #[test]
            fn split_is_area_additive(poly in random_polygon(), phi in 0.0f64..PI, frac in 0.05f64..0.95) {
                let (lo, hi) = poly.support(Point::unit(phi));
                let line = LineP::new(phi, lo + frac * (hi - lo));
                if let Ok((a, b)) = poly.split(&line) {
                    let tot = poly.area();
                    prop_assert!((a.area() + b.area() - tot).abs() <= 1e-9 * tot);
                    prop_assert!(a.vertices().iter().all(|v| line.signed_distance(*v) >= -1e-9));
                    prop_assert!(b.vertices().iter().all(|v| line.signed_distance(*v) <= 1e-9));
                }
            }

            #[test]
            fn width_translation_and_half_turn(poly in random_polygon(), phi in 0.0f64..PI, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
                let w = poly.width(phi);
                prop_assert!(w >= 0.0);
                prop_assert!((poly.translate(Point::new(dx, dy)).width(phi) - w).abs() < 1e-9);
                prop_assert!((poly.width(phi + PI) - w).abs() < 1e-9);
            }

            #[test]
            fn set_covariance_non_increasing(poly in random_polygon()) {
                let d = poly.diameter();
                let mut prev = poly.area();
                for k in 1..=10 {
                    let v = isotropized_set_covariance(&poly, d * k as f64 / 10.0, 90);
                    prop_assert!(v <= prev + 1e-12);
                    prev = v;
                }
                prop_assert!(prev.abs() < 1e-12);
            }
        }
    }
}
