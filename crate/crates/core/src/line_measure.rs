//! Translation-invariant driving measures `Λ = τ·ℓ₊ ⊗ R` on lines, their hit
//! measures, line samplers and samplers for the segment-intersection measure.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{reduce_half_turn, ConvexPolygon, LineP, Point, Segment};

/// Grid size for tabulated direction densities.
pub const DENSITY_GRID: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineMeasureError {
    #[error("tau must be positive and finite, got {0}")]
    BadTau(f64),
    #[error("direction table is empty")]
    Empty,
    #[error("negative or non-finite direction weight {0}")]
    BadWeight(f64),
    #[error("atom weights sum to {0}, expected 1")]
    BadMass(f64),
    #[error("body has zero hit measure")]
    ZeroHitMeasure,
    #[error("segment-intersection measure vanishes ({rejections} rejected draws)")]
    ZeroSegmentMeasure { rejections: u64 },
}

/// Directional distribution `R` of the normal angle on `[0, π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionalDistribution {
    Uniform,
    /// `(angle, weight)` pairs; weights sum to one.
    Atoms(Vec<[f64; 2]>),
    /// `(angle, value)` nodes of a periodic piecewise-linear density; it is
    /// normalised on construction.
    Density(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MeasureSpec {
    tau: f64,
    directions: DirectionalDistribution,
}

/// `Λ = τ·ℓ₊ ⊗ R`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MeasureSpec", into = "MeasureSpec")]
pub struct DrivingMeasure {
    tau: f64,
    directions: DirectionalDistribution,
    /// Discrete `(angle, mass)` representation used for non-uniform `R`:
    /// the atoms themselves, or the density on a uniform grid.
    nodes: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    intersection_density: f64,
}

impl PartialEq for DrivingMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.tau == other.tau && self.directions == other.directions
    }
}

impl TryFrom<MeasureSpec> for DrivingMeasure {
    type Error = LineMeasureError;
    fn try_from(s: MeasureSpec) -> Result<Self, Self::Error> {
        DrivingMeasure::new(s.tau, s.directions)
    }
}

impl From<DrivingMeasure> for MeasureSpec {
    fn from(m: DrivingMeasure) -> Self {
        MeasureSpec {
            tau: m.tau,
            directions: m.directions,
        }
    }
}

impl DrivingMeasure {
    pub fn new(tau: f64, directions: DirectionalDistribution) -> Result<Self, LineMeasureError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(LineMeasureError::BadTau(tau));
        }
        let nodes = match &directions {
            DirectionalDistribution::Uniform => Vec::new(),
            DirectionalDistribution::Atoms(a) => atom_nodes(a)?,
            DirectionalDistribution::Density(d) => density_nodes(d)?,
        };
        let mut acc = 0.0;
        let cumulative = nodes
            .iter()
            .map(|(_, w)| {
                acc += w;
                acc
            })
            .collect();
        let c = match &directions {
            DirectionalDistribution::Uniform => 2.0 / PI,
            DirectionalDistribution::Atoms(_) => {
                let mut s = 0.0;
                for (a, wa) in &nodes {
                    for (b, wb) in &nodes {
                        s += wa * wb * (a - b).sin().abs();
                    }
                }
                s
            }
            DirectionalDistribution::Density(_) => grid_sine_pairs(&nodes),
        };
        Ok(Self {
            tau,
            directions,
            nodes,
            cumulative,
            intersection_density: tau * tau * c,
        })
    }

    /// The isometry-invariant measure with length density `tau`.
    pub fn isotropic(tau: f64) -> Self {
        Self::new(tau, DirectionalDistribution::Uniform).expect("positive tau")
    }

    pub fn atoms(tau: f64, atoms: &[(f64, f64)]) -> Result<Self, LineMeasureError> {
        Self::new(
            tau,
            DirectionalDistribution::Atoms(atoms.iter().map(|&(a, w)| [a, w]).collect()),
        )
    }

    /// Two orthogonal directions with equal weight.
    pub fn orthogonal_pair(tau: f64) -> Self {
        Self::atoms(tau, &[(0.0, 0.5), (PI / 2.0, 0.5)]).expect("valid atoms")
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn directions(&self) -> &DirectionalDistribution {
        &self.directions
    }

    #[inline]
    pub fn is_uniform(&self) -> bool {
        matches!(self.directions, DirectionalDistribution::Uniform)
    }

    /// `∫ f(φ) R(dφ)`, exact for atoms, trapezoid for densities.
    fn integrate_directions<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|&(a, w)| w * f(a)).sum()
    }

    /// `Λ([K])`.
    pub fn hit_measure_convex(&self, k: &ConvexPolygon) -> f64 {
        match self.directions {
            DirectionalDistribution::Uniform => self.tau * k.perimeter() / PI,
            _ => self.tau * self.integrate_directions(|phi| k.width(phi)),
        }
    }

    /// `Λ([e])`.
    pub fn hit_measure_segment(&self, e: &Segment) -> f64 {
        let d = e.b - e.a;
        match self.directions {
            DirectionalDistribution::Uniform => 2.0 * self.tau * d.norm() / PI,
            _ => {
                let len = d.norm();
                let v = self.integrate_directions(|phi| d.dot(Point::unit(phi)).abs());
                // parallel atoms leave rounding residue of order 1e-16·len
                if v <= 1e-14 * len {
                    0.0
                } else {
                    self.tau * v
                }
            }
        }
    }

    /// Hit measure per unit length of a segment with direction angle `theta`.
    pub fn hit_density_along(&self, theta: f64) -> f64 {
        let u = Point::unit(theta);
        self.hit_measure_segment(&Segment::new(Point::default(), u))
    }

    /// Mass of `R` in `bins` equal bins of the line direction angle
    /// (normal angle plus `π/2`, mod `π`).
    pub fn direction_bins(&self, bins: usize) -> Vec<f64> {
        let bins = bins.max(1);
        if self.is_uniform() {
            return vec![1.0 / bins as f64; bins];
        }
        let mut out = vec![0.0; bins];
        for &(a, w) in &self.nodes {
            out[direction_bin(a + PI / 2.0, bins)] += w;
        }
        out
    }

    /// Density `c` of `⟨⟨Λ ∩ Λ⟩⟩ = c·Lebesgue`.
    #[inline]
    pub fn point_intersection_density(&self) -> f64 {
        self.intersection_density
    }

    /// A normal angle drawn from `R`.
    pub fn sample_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.directions {
            DirectionalDistribution::Uniform => rng.random::<f64>() * PI,
            DirectionalDistribution::Atoms(_) => self.nodes[self.pick(rng.random())].0,
            DirectionalDistribution::Density(_) => {
                let k = self.pick(rng.random());
                let h = PI / DENSITY_GRID as f64;
                reduce_half_turn(self.nodes[k].0 + (rng.random::<f64>() - 0.5) * h)
            }
        }
    }

    fn pick(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let x = u * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.nodes.len() - 1)
    }

    /// Line from the normalised restriction `Λ(· ∩ [K]) / Λ([K])`.
    pub fn sample_line_hitting<R: Rng + ?Sized>(
        &self,
        k: &ConvexPolygon,
        rng: &mut R,
    ) -> Result<LineP, LineMeasureError> {
        let phi = match self.directions {
            DirectionalDistribution::Atoms(_) => {
                let weights: Vec<f64> = self.nodes.iter().map(|&(a, w)| w * k.width(a)).collect();
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) {
                    return Err(LineMeasureError::ZeroHitMeasure);
                }
                let mut x = rng.random::<f64>() * total;
                let mut idx = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if x < *w {
                        idx = i;
                        break;
                    }
                    x -= w;
                }
                self.nodes[idx].0
            }
            _ => {
                // accept φ ~ R with probability width(K, φ) / 2r, r the radius
                // of a covering disk
                let (_, r) = k.bounding_disk();
                let bound = 2.0 * r;
                if !(bound > 0.0) {
                    return Err(LineMeasureError::ZeroHitMeasure);
                }
                loop {
                    let phi = self.sample_direction(rng);
                    if rng.random::<f64>() * bound < k.width(phi) {
                        break phi;
                    }
                }
            }
        };
        let (lo, hi) = k.support(Point::unit(phi));
        let p = lo + rng.random::<f64>() * (hi - lo);
        Ok(LineP::new(phi, p))
    }

    /// Line from the normalised restriction of `Λ` to lines hitting `e`.
    pub fn sample_line_hitting_segment<R: Rng + ?Sized>(
        &self,
        e: &Segment,
        rng: &mut R,
    ) -> Result<LineP, LineMeasureError> {
        let d = e.b - e.a;
        let phi = match self.directions {
            DirectionalDistribution::Atoms(_) => {
                let weights: Vec<f64> = self
                    .nodes
                    .iter()
                    .map(|&(a, w)| w * d.dot(Point::unit(a)).abs())
                    .collect();
                let total: f64 = weights.iter().sum();
                if !(total > 1e-300) {
                    return Err(LineMeasureError::ZeroHitMeasure);
                }
                let mut x = rng.random::<f64>() * total;
                let mut idx = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if x < *w {
                        idx = i;
                        break;
                    }
                    x -= w;
                }
                self.nodes[idx].0
            }
            _ => {
                let len = d.norm();
                if len == 0.0 {
                    return Err(LineMeasureError::ZeroHitMeasure);
                }
                loop {
                    let phi = self.sample_direction(rng);
                    if rng.random::<f64>() * len < d.dot(Point::unit(phi)).abs() {
                        break phi;
                    }
                }
            }
        };
        // for fixed φ the crossing point is uniform along e
        let x = e.point_at(rng.random::<f64>());
        Ok(LineP::new(phi, x.dot(Point::unit(phi))))
    }
}

fn atom_nodes(a: &[[f64; 2]]) -> Result<Vec<(f64, f64)>, LineMeasureError> {
    if a.is_empty() {
        return Err(LineMeasureError::Empty);
    }
    let mut total = 0.0;
    for &[ang, w] in a {
        if !(w >= 0.0 && w.is_finite()) || !ang.is_finite() {
            return Err(LineMeasureError::BadWeight(w));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(LineMeasureError::BadMass(total));
    }
    Ok(a.iter().map(|&[ang, w]| (reduce_half_turn(ang), w)).collect())
}

fn density_nodes(d: &[[f64; 2]]) -> Result<Vec<(f64, f64)>, LineMeasureError> {
    if d.is_empty() {
        return Err(LineMeasureError::Empty);
    }
    let mut table: Vec<(f64, f64)> = Vec::with_capacity(d.len());
    for &[ang, v] in d {
        if !(v >= 0.0 && v.is_finite()) || !ang.is_finite() {
            return Err(LineMeasureError::BadWeight(v));
        }
        table.push((reduce_half_turn(ang), v));
    }
    table.sort_by(|x, y| x.0.total_cmp(&y.0));
    let eval = |phi: f64| -> f64 {
        let n = table.len();
        if n == 1 {
            return table[0].1;
        }
        let i = table.partition_point(|x| x.0 <= phi);
        // neighbours with periodic wrap
        let (a, b) = if i == 0 || i == n {
            let a = table[n - 1];
            let b = table[0];
            (a, (b.0 + PI, b.1))
        } else {
            (table[i - 1], table[i])
        };
        let x = if phi < a.0 { phi + PI } else { phi };
        let span = b.0 - a.0;
        if span <= 0.0 {
            return a.1;
        }
        a.1 + (b.1 - a.1) * (x - a.0) / span
    };
    let h = PI / DENSITY_GRID as f64;
    let mut nodes: Vec<(f64, f64)> = (0..DENSITY_GRID)
        .map(|k| {
            let phi = k as f64 * h;
            (phi, eval(phi) * h)
        })
        .collect();
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    if !(total > 0.0) {
        return Err(LineMeasureError::BadMass(total));
    }
    for n in &mut nodes {
        n.1 /= total;
    }
    Ok(nodes)
}

/// `∬ |sin(α − β)| R(dα) R(dβ)` over a uniform periodic grid.
fn grid_sine_pairs(nodes: &[(f64, f64)]) -> f64 {
    let n = nodes.len();
    let s: Vec<f64> = (0..n).map(|m| (m as f64 * PI / n as f64).sin().abs()).collect();
    let mut acc = 0.0;
    for (j, (_, wj)) in nodes.iter().enumerate() {
        let mut inner = 0.0;
        for (k, (_, wk)) in nodes.iter().enumerate() {
            inner += wk * s[(j + n - k) % n];
        }
        acc += wj * inner;
    }
    acc
}

/// Draw from `⟨⟨(Λ×Λ)∩Λ⟩⟩` with an importance weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSegmentSample {
    pub segment: Segment,
    pub weight: f64,
}

/// Sampler for the segment-intersection measure restricted to segments
/// inside a window `W`.
///
/// A carrier `L` is drawn from `Λ(·∩[W])/Λ([W])`, then two lines from
/// `Λ(·∩[L∩W])/Λ([L∩W])`; the weight `Λ([W])·Λ([L∩W])²` makes weighted
/// sums unbiased for integrals against the measure.
#[derive(Clone, Debug)]
pub struct SegmentIntersectionSampler<'a> {
    lam: &'a DrivingMeasure,
    window: &'a ConvexPolygon,
    hit_window: f64,
    pub max_rejections: u64,
    pub rejections: u64,
}

impl<'a> SegmentIntersectionSampler<'a> {
    pub fn new(lam: &'a DrivingMeasure, window: &'a ConvexPolygon) -> Result<Self, LineMeasureError> {
        let hit_window = lam.hit_measure_convex(window);
        if !(hit_window > 0.0) {
            return Err(LineMeasureError::ZeroHitMeasure);
        }
        Ok(Self {
            lam,
            window,
            hit_window,
            max_rejections: 10_000,
            rejections: 0,
        })
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<WeightedSegmentSample, LineMeasureError> {
        let mut local = 0u64;
        loop {
            let carrier = self.lam.sample_line_hitting(self.window, rng)?;
            let chord = match self.window.clip_line(&carrier) {
                Some(c) => c,
                None => {
                    local += 1;
                    self.rejections += 1;
                    if local >= self.max_rejections {
                        return Err(LineMeasureError::ZeroSegmentMeasure { rejections: local });
                    }
                    continue;
                }
            };
            let hit_chord = self.lam.hit_measure_segment(&chord);
            if !(hit_chord > 1e-14 * chord.length().max(1.0)) {
                local += 1;
                self.rejections += 1;
                if local >= self.max_rejections {
                    return Err(LineMeasureError::ZeroSegmentMeasure { rejections: local });
                }
                continue;
            }
            let l1 = self.lam.sample_line_hitting_segment(&chord, rng)?;
            let l2 = self.lam.sample_line_hitting_segment(&chord, rng)?;
            let (x1, x2) = match (carrier.intersect(&l1), carrier.intersect(&l2)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    local += 1;
                    self.rejections += 1;
                    if local >= self.max_rejections {
                        return Err(LineMeasureError::ZeroSegmentMeasure { rejections: local });
                    }
                    continue;
                }
            };
            return Ok(WeightedSegmentSample {
                segment: Segment::new(x1, x2),
                weight: self.hit_window * hit_chord * hit_chord,
            });
        }
    }
}

/// Sampler for the whole-plane segment-intersection measure restricted to
/// segments whose carrier line hits a region `A`.
///
/// Endpoints are placed on the full carrier line with a symmetric Lomax
/// density (tail exponent `1 + alpha`) centred on the chord `L ∩ A`, so
/// long segments reaching far outside `A` are represented.
#[derive(Clone, Debug)]
pub struct WholePlaneSegmentSampler<'a> {
    lam: &'a DrivingMeasure,
    region: &'a ConvexPolygon,
    hit_region: f64,
    /// Scale of the endpoint density.
    pub scale: f64,
    /// Tail index of the endpoint density.
    pub alpha: f64,
}

impl<'a> WholePlaneSegmentSampler<'a> {
    pub fn new(
        lam: &'a DrivingMeasure,
        region: &'a ConvexPolygon,
        scale: f64,
    ) -> Result<Self, LineMeasureError> {
        let hit_region = lam.hit_measure_convex(region);
        if !(hit_region > 0.0) {
            return Err(LineMeasureError::ZeroHitMeasure);
        }
        Ok(Self {
            lam,
            region,
            hit_region,
            scale,
            alpha: 0.5,
        })
    }

    fn density(&self, s: f64) -> f64 {
        let a = self.alpha;
        0.5 * a / self.scale * (1.0 + s.abs() / self.scale).powf(-(a + 1.0))
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mag = self.scale * ((1.0 - u).powf(-1.0 / self.alpha) - 1.0);
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<WeightedSegmentSample, LineMeasureError> {
        loop {
            let carrier = self.lam.sample_line_hitting(self.region, rng)?;
            let chord = match self.region.clip_line(&carrier) {
                Some(c) => c,
                None => continue,
            };
            let theta = carrier.phi + PI / 2.0;
            let per_length = self.lam.hit_density_along(theta);
            if !(per_length > 0.0) {
                return Err(LineMeasureError::ZeroSegmentMeasure { rejections: 1 });
            }
            let mid = carrier.coordinate_of(chord.midpoint());
            let s1 = self.draw(rng);
            let s2 = self.draw(rng);
            let w = self.hit_region * per_length * per_length
                / (self.density(s1) * self.density(s2));
            if !w.is_finite() {
                continue;
            }
            return Ok(WeightedSegmentSample {
                segment: Segment::new(carrier.point_at(mid + s1), carrier.point_at(mid + s2)),
                weight: w,
            });
        }
    }
}

/// Bin of an angle folded into `[0, π)`. Bins are centred on `kπ/bins`, so
/// axis directions never sit on a bin edge.
pub fn direction_bin(angle: f64, bins: usize) -> usize {
    let x = angle.rem_euclid(PI) / PI * bins as f64 + 0.5;
    (x.floor() as usize) % bins
}
