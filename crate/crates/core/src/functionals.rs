//! Edge functionals `Σ_φ`, the line-integral functional `A_φ`, the vertex
//! process and the edge-length measure.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexPolygon, LineP, Point, Segment, EPS};
use crate::line_measure::{direction_bin, DrivingMeasure, LineMeasureError};
use crate::mnw::Tessellation;
use crate::stats::McEstimate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("region is not contained in the window")]
    RegionOutsideWindow,
    #[error(transparent)]
    Measure(#[from] LineMeasureError),
}

type SegmentFn = dyn Fn(&Segment, &[Point]) -> f64 + Send + Sync;

/// A bounded functional of a segment together with its vertices.
#[derive(Clone)]
pub enum EdgeFunctional {
    One,
    Length,
    /// `Λ([e])` for the driving measure in use.
    HitMeasure,
    /// `η^f` with `f = 1_A`: number of vertices of the edge in `A`.
    VertexSum(ConvexPolygon),
    /// `J^g` with `g = 1_A`: `ℓ(e ∩ A)`.
    LengthIn(ConvexPolygon),
    /// Any evaluator of `(segment, vertices)`.
    Custom(Arc<SegmentFn>),
}

impl fmt::Debug for EdgeFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => write!(f, "One"),
            Self::Length => write!(f, "Length"),
            Self::HitMeasure => write!(f, "HitMeasure"),
            Self::VertexSum(a) => write!(f, "VertexSum({:?})", a.vertices()),
            Self::LengthIn(a) => write!(f, "LengthIn({:?})", a.vertices()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl EdgeFunctional {
    pub fn eval(&self, lam: &DrivingMeasure, seg: &Segment, vertices: &[Point]) -> f64 {
        if seg.length() == 0.0 {
            return 0.0;
        }
        match self {
            Self::One => 1.0,
            Self::Length => seg.length(),
            Self::HitMeasure => lam.hit_measure_segment(seg),
            Self::VertexSum(a) => vertices.iter().filter(|v| a.contains(**v, 0.0)).count() as f64,
            Self::LengthIn(a) => a.clip_segment(seg).map_or(0.0, |(s, _)| s.length()),
            Self::Custom(f) => f(seg, vertices),
        }
    }
}

/// `Σ_φ(Y) = Σ_e φ(e)` over maximal edges. Vertices of an edge are its two
/// endpoints followed by its internal vertices.
pub fn sigma(y: &Tessellation, phi: &EdgeFunctional) -> f64 {
    let mut verts = Vec::new();
    let mut s = 0.0;
    for e in &y.edges {
        verts.clear();
        if matches!(phi, EdgeFunctional::VertexSum(_) | EdgeFunctional::Custom(_)) {
            verts.push(e.segment.a);
            verts.push(e.segment.b);
            verts.extend(e.internal_vertices.iter().map(|v| v.point));
        }
        s += phi.eval(&y.lam, &e.segment, &verts);
    }
    s
}

/// Pieces of `L ∩ W` between consecutive crossings with the edges of `y`.
pub fn line_pieces(y: &Tessellation, line: &LineP) -> Vec<Segment> {
    let chord = match y.window.clip_line(line) {
        Some(c) => c,
        None => return Vec::new(),
    };
    let mut pts = vec![chord.a];
    let cuts = y.section_with_line(line);
    // section points are ordered along the line direction
    let forward = line.coordinate_of(chord.b) >= line.coordinate_of(chord.a);
    if forward {
        pts.extend(cuts);
    } else {
        pts.extend(cuts.into_iter().rev());
    }
    pts.push(chord.b);
    pts.windows(2).map(|w| Segment::new(w[0], w[1])).collect()
}

/// MC estimate of `A_φ(Y) = ∫_{[W]} Σ_{segments of Y∩L∩W} φ Λ(dL)`.
pub fn a_phi<R: Rng + ?Sized>(
    y: &Tessellation,
    lam: &DrivingMeasure,
    phi: &EdgeFunctional,
    n_lines: usize,
    rng: &mut R,
    seed: u64,
) -> Result<McEstimate, FunctionalError> {
    let hit = lam.hit_measure_convex(&y.window);
    let mut vals = Vec::with_capacity(n_lines.max(1));
    for _ in 0..n_lines.max(1) {
        let line = lam.sample_line_hitting(&y.window, rng)?;
        let s: f64 = line_pieces(y, &line)
            .iter()
            .map(|seg| phi.eval(lam, seg, &[seg.a, seg.b]))
            .sum();
        vals.push(hit * s);
    }
    Ok(McEstimate::from_samples(&vals, seed))
}

/// Interior T-vertices of a tessellation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexProcess {
    pub points: Vec<Point>,
    pub window: ConvexPolygon,
}

impl VertexProcess {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn intensity(&self) -> f64 {
        self.points.len() as f64 / self.window.area()
    }

    pub fn count_in(&self, a: &ConvexPolygon) -> usize {
        self.points.iter().filter(|p| a.contains(**p, 0.0)).count()
    }

    /// CSV with an `x,y` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y\r\n");
        for p in &self.points {
            s.push_str(&format!("{},{}\r\n", p.x, p.y));
        }
        s
    }
}

/// Internal vertices of all maximal edges; boundary vertices are excluded.
pub fn vertices(y: &Tessellation) -> VertexProcess {
    let mut points: Vec<Point> = y
        .edges
        .iter()
        .flat_map(|e| e.internal_vertices.iter().map(|v| v.point))
        .collect();
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    points.dedup_by(|a, b| a.dist(*b) <= EPS);
    VertexProcess {
        points,
        window: y.window.clone(),
    }
}

/// `E_Y(A) = Σ_e ℓ(e ∩ A)` for `A` inside the window.
pub fn edge_length_in(y: &Tessellation, a: &ConvexPolygon) -> Result<f64, FunctionalError> {
    if !y.window.contains_polygon(a, 1e-9) {
        return Err(FunctionalError::RegionOutsideWindow);
    }
    Ok(edge_length_in_unchecked(y, a))
}

pub(crate) fn edge_length_in_unchecked(y: &Tessellation, a: &ConvexPolygon) -> f64 {
    y.edges
        .iter()
        .filter_map(|e| a.clip_segment(&e.segment))
        .map(|(s, _)| s.length())
        .sum()
}

/// Edge length per direction bin of `[0, π)`, normalised to sum one; it
/// estimates `lam.direction_bins(bins)`.
pub fn direction_histogram(y: &Tessellation, bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    let mut h = vec![0.0; bins];
    for e in &y.edges {
        h[direction_bin(e.segment.direction_angle(), bins)] += e.segment.length();
    }
    let total: f64 = h.iter().sum();
    if total > 0.0 {
        h.iter_mut().for_each(|v| *v /= total);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mnw::construct_seeded;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sq() -> ConvexPolygon {
        ConvexPolygon::unit_square()
    }

    #[test]
    fn empty_tessellation() {
        let lam = DrivingMeasure::isotropic(1.0);
        let y = construct_seeded(&lam, &sq(), 0.0, 1, Default::default()).unwrap();
        for phi in [EdgeFunctional::One, EdgeFunctional::Length, EdgeFunctional::HitMeasure] {
            assert_eq!(sigma(&y, &phi), 0.0);
        }
        assert!(vertices(&y).is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = a_phi(&y, &lam, &EdgeFunctional::One, 50, &mut rng, 0).unwrap();
        assert!((a.mean - 4.0 / PI).abs() < 1e-12 && a.variance.abs() < 1e-20);
    }

    #[test]
    fn hit_measure_sum_is_scaled_length() {
        let lam = DrivingMeasure::isotropic(1.0);
        for s in 0..20 {
            let y = construct_seeded(&lam, &sq(), 4.0, s, Default::default()).unwrap();
            let a = sigma(&y, &EdgeFunctional::HitMeasure);
            let b = 2.0 / PI * sigma(&y, &EdgeFunctional::Length);
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn single_split_has_no_interior_vertices() {
        let lam = DrivingMeasure::isotropic(1.0);
        let y = (0..)
            .map(|s| construct_seeded(&lam, &sq(), 0.5, s, Default::default()).unwrap())
            .find(|y| y.edges.len() == 1)
            .unwrap();
        assert_eq!(vertices(&y).len(), 0);
        assert_eq!(y.boundary_endpoints(), 2);
    }

    #[test]
    fn vertex_count_identity() {
        let lam = DrivingMeasure::orthogonal_pair(1.0);
        for s in 0..50 {
            let y = construct_seeded(&lam, &sq(), 5.0, s, Default::default()).unwrap();
            assert_eq!(vertices(&y).len(), 2 * y.edges.len() - y.boundary_endpoints());
        }
    }

    #[test]
    fn vertex_sum_counts_each_vertex_twice() {
        let lam = DrivingMeasure::isotropic(1.0);
        let a = ConvexPolygon::rectangle(0.2, 0.2, 0.8, 0.8).unwrap();
        for s in 0..20 {
            let y = construct_seeded(&lam, &sq(), 4.0, s, Default::default()).unwrap();
            let n_in = vertices(&y).count_in(&a);
            assert_eq!(sigma(&y, &EdgeFunctional::VertexSum(a.clone())), 2.0 * n_in as f64);
        }
    }

    #[test]
    fn linearity_of_sigma() {
        let lam = DrivingMeasure::isotropic(1.0);
        let y = construct_seeded(&lam, &sq(), 3.0, 2, Default::default()).unwrap();
        let combo = EdgeFunctional::Custom(Arc::new(|s: &Segment, _: &[Point]| 2.0 + 3.0 * s.length()));
        let lhs = sigma(&y, &combo);
        let rhs = 2.0 * sigma(&y, &EdgeFunctional::One) + 3.0 * sigma(&y, &EdgeFunctional::Length);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn edge_length_additivity_and_window() {
        let lam = DrivingMeasure::isotropic(1.0);
        let y = construct_seeded(&lam, &sq(), 5.0, 3, Default::default()).unwrap();
        let whole = edge_length_in(&y, &sq()).unwrap();
        assert!((whole - sigma(&y, &EdgeFunctional::Length)).abs() < 1e-12);
        let left = ConvexPolygon::rectangle(0.0, 0.0, 0.4, 1.0).unwrap();
        let right = ConvexPolygon::rectangle(0.4, 0.0, 1.0, 1.0).unwrap();
        let sum = edge_length_in(&y, &left).unwrap() + edge_length_in(&y, &right).unwrap();
        // an edge running exactly along x = 0.4 has probability zero
        assert!((sum - whole).abs() < 1e-12);
        let outside = ConvexPolygon::rectangle(0.5, 0.5, 1.5, 1.5).unwrap();
        assert_eq!(edge_length_in(&y, &outside).unwrap_err(), FunctionalError::RegionOutsideWindow);
    }

    #[test]
    fn a_one_identity_single_realization() {
        let lam = DrivingMeasure::isotropic(1.0);
        let y = construct_seeded(&lam, &sq(), 3.0, 12, Default::default()).unwrap();
        assert!(y.edges.len() > 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = a_phi(&y, &lam, &EdgeFunctional::One, 20_000, &mut rng, 5).unwrap();
        let target = lam.hit_measure_convex(&sq()) + sigma(&y, &EdgeFunctional::HitMeasure);
        assert!((a.mean - target).abs() < 3.0 * a.se_mean, "{} vs {}", a.mean, target);
    }

    #[test]
    fn a_hit_measure_is_constant() {
        let lam = DrivingMeasure::isotropic(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for s in [0, 1] {
            let y = construct_seeded(&lam, &sq(), 2.0 + s as f64, s, Default::default()).unwrap();
            let a = a_phi(&y, &lam, &EdgeFunctional::HitMeasure, 20_000, &mut rng, 0).unwrap();
            assert!((a.mean - 2.0 / PI).abs() < 3.0 * a.se_mean);
        }
    }

    #[test]
    fn csv_export() {
        let vp = VertexProcess {
            points: vec![Point::new(0.5, 0.25)],
            window: sq(),
        };
        assert_eq!(vp.to_csv(), "x,y\r\n0.5,0.25\r\n");
    }

    #[test]
    fn direction_histogram_follows_the_directional_distribution() {
        let lam = DrivingMeasure::orthogonal_pair(1.0);
        let y = construct_seeded(&lam, &sq(), 8.0, 4, Default::default()).unwrap();
        let h = direction_histogram(&y, 4);
        let expected = lam.direction_bins(4);
        assert_eq!(expected.iter().filter(|&&m| m == 0.5).count(), 2);
        for (a, b) in h.iter().zip(&expected) {
            assert_eq!(*a == 0.0, *b == 0.0, "{h:?} vs {expected:?}");
        }
        let iso = DrivingMeasure::isotropic(1.0);
        let mut acc = vec![0.0; 4];
        for s in 0..200 {
            let y = construct_seeded(&iso, &sq(), 6.0, s, Default::default()).unwrap();
            for (a, v) in acc.iter_mut().zip(direction_histogram(&y, 4)) {
                *a += v / 200.0;
            }
        }
        for a in acc {
            assert!((a - 0.25).abs() < 0.02, "{a}");
        }
    }
}
