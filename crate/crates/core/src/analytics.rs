//! Closed-form second-order quantities: exponential tails, the `I^n`
//! integrals, means and variances of edge functionals, the covariance
//! kernels for general driving measures and the isotropic correlation
//! functions of the vertex process.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{set_covariance_disk, ConvexPolygon, GeometryError, Point, Segment};
use crate::line_measure::{
    DrivingMeasure, LineMeasureError, SegmentIntersectionSampler, WholePlaneSegmentSampler,
};
use crate::mnw::splitmix64;
use crate::quadrature::{integrate, integrate_pieces, integrate_to_infinity, Quad};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("I^n is defined here for n in 1..=3, got {0}")]
    BadOrder(u32),
    #[error("{statistic:?} is not available for {model:?}")]
    Unsupported { model: Model, statistic: Statistic },
    #[error("grid must be positive and strictly increasing")]
    BadGrid,
    #[error("at least {min} samples are required, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error(transparent)]
    Measure(#[from] LineMeasureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, AnalyticsError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(AnalyticsError::NonPositive { name, value })
    }
}

/// `T_n(u) = Σ_{k≥n} u^k/k!`.
pub fn tail_exp(n: u32, u: f64) -> f64 {
    if u == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if u.abs() < 1.0 {
        let mut term = 1.0;
        for k in 1..=n {
            term *= u / k as f64;
        }
        let mut sum = 0.0;
        let mut k = n;
        loop {
            sum += term;
            k += 1;
            term *= u / k as f64;
            if term.abs() <= 1e-17 * sum.abs() {
                return sum + term;
            }
        }
    }
    let mut partial = 0.0;
    let mut term = 1.0;
    for k in 0..n {
        partial += term;
        term *= u / (k + 1) as f64;
    }
    u.exp() - partial
}

/// `∫_0^t s² e^{-λs} ds`.
#[inline]
pub fn i1(lambda: f64, t: f64) -> f64 {
    i_order(1, lambda, t)
}

/// `∫_0^t (t-s) s² e^{-λs} ds`.
#[inline]
pub fn i2(lambda: f64, t: f64) -> f64 {
    i_order(2, lambda, t)
}

/// `½ ∫_0^t (t-s)² s² e^{-λs} ds`.
#[inline]
pub fn i3(lambda: f64, t: f64) -> f64 {
    i_order(3, lambda, t)
}

/// `I^n(s² e^{-λs}; t) = 1/(n-1)! ∫_0^t (t-s)^{n-1} s² e^{-λs} ds` for `n ∈ {1,2,3}`.
pub fn i_n(n: u32, lambda: f64, t: f64) -> Result<f64, AnalyticsError> {
    if !(1..=3).contains(&n) {
        return Err(AnalyticsError::BadOrder(n));
    }
    Ok(i_order(n, lambda, t))
}

fn i_order(n: u32, lambda: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if lambda * t < 4.0 {
        i_series(n, lambda, t)
    } else {
        i_closed(n, lambda, t)
    }
}

fn i_series(n: u32, lambda: f64, t: f64) -> f64 {
    let x = lambda * t;
    {
        // e^{-x} Σ_k 2(n-1+k)!/(k!(n-1)!(n+k+2)!) λ^k t^{n+k+2}; all terms positive
        let mut c = 2.0;
        for j in 1..=(n + 2) {
            c /= j as f64;
        }
        // c_k = 2 C(n-1+k, k) / (n+k+2)!
        let mut sum = 0.0;
        let mut term = c;
        let mut k = 0u32;
        loop {
            sum += term;
            k += 1;
            term *= x * (n - 1 + k) as f64 / (k as f64 * (n + k + 2) as f64);
            if term <= 1e-17 * sum || k > 200 {
                break;
            }
        }
        (-x).exp() * sum * t.powi(n as i32 + 2)
    }
}

fn i_closed(n: u32, lambda: f64, t: f64) -> f64 {
    let x = lambda * t;
    let e = (-x).exp();
    match n {
        1 => (2.0 - (x * x + 2.0 * x + 2.0) * e) / lambda.powi(3),
        2 => (2.0 * x - 6.0 + (x * x + 4.0 * x + 6.0) * e) / lambda.powi(4),
        _ => (x * x - 6.0 * x + 12.0 - (x * x + 6.0 * x + 12.0) * e) / lambda.powi(5),
    }
}

/// `p(x) − q(x) e^{-x}` with the low-order cancellation done on the Taylor
/// coefficients for small `x`.
fn poly_minus_poly_exp(p: &[f64], q: &[f64], x: f64) -> f64 {
    if x >= 1.0 {
        let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &a| acc * x + a);
        return horner(p) - horner(q) * (-x).exp();
    }
    let mut inv_fact = [0.0f64; 31];
    inv_fact[0] = 1.0;
    for k in 1..31 {
        inv_fact[k] = inv_fact[k - 1] / k as f64;
    }
    let mut sum = 0.0;
    let mut xm = 1.0;
    for m in 0..31 {
        let mut c = p.get(m).copied().unwrap_or(0.0);
        for (j, &qj) in q.iter().enumerate().take(m + 1) {
            let d = m - j;
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            c -= qj * sign * inv_fact[d];
        }
        sum += c * xm;
        xm *= x;
    }
    sum
}

/// `E Σ_1(Y(t, W)) = tΛ([W]) + (t²/2) c Area(W)`.
pub fn mean_edge_count(lam: &DrivingMeasure, w: &ConvexPolygon, t: f64) -> f64 {
    t * lam.hit_measure_convex(w) + 0.5 * t * t * lam.point_intersection_density() * w.area()
}

/// Window description for the isotropic variance formulas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowShape {
    Disk { radius: f64 },
    Polygon(ConvexPolygon),
}

impl WindowShape {
    pub fn area(&self) -> f64 {
        match self {
            Self::Disk { radius } => PI * radius * radius,
            Self::Polygon(p) => p.area(),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            Self::Disk { radius } => 2.0 * PI * radius,
            Self::Polygon(p) => p.perimeter(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Self::Disk { radius } => 2.0 * radius,
            Self::Polygon(p) => p.diameter(),
        }
    }

    /// Isotropized set covariance `γ̄_W(r)`. For polygons the angular mean
    /// is integrated piecewise between the directions where the
    /// intersection `W ∩ (W + r u_φ)` changes shape.
    pub fn gamma_bar(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.diameter() {
            return 0.0;
        }
        match self {
            Self::Disk { radius } => set_covariance_disk(*radius, r).unwrap_or(0.0),
            Self::Polygon(p) => {
                if r == 0.0 {
                    return p.area();
                }
                let mut breaks = translation_events(p, r);
                breaks.push(0.0);
                breaks.push(PI);
                breaks.sort_by(f64::total_cmp);
                breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                let f = |phi: f64| p.intersection_area(&p.translate(Point::unit(phi) * r));
                let tol = 1e-12 * p.area();
                integrate_pieces(&f, &breaks, tol).value / PI
            }
        }
    }

    /// Chord power integral `∫ ℓ(W ∩ L)² dL` over lines with `dL = dp dφ`,
    /// `φ ∈ [0, π)`.
    pub fn chord_power_integral_2(&self) -> f64 {
        match self {
            Self::Disk { radius } => 16.0 * PI * radius.powi(3) / 3.0,
            Self::Polygon(p) => polygon_chord_power_2(p),
        }
    }

    /// A polygon usable by the simulator (disks become regular 256-gons).
    pub fn to_polygon(&self) -> ConvexPolygon {
        match self {
            Self::Disk { radius } => ConvexPolygon::regular(256, *radius, Point::default())
                .expect("positive radius"),
            Self::Polygon(p) => p.clone(),
        }
    }
}

/// Angles in `[0, π)` at which a vertex of `W` or of `W + r u_φ` crosses
/// a side line of the other polygon. Between these the intersection keeps
/// its combinatorial type and the area is smooth in `φ`.
fn translation_events(p: &ConvexPolygon, r: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for s in p.sides() {
        let e = s.b - s.a;
        let len = e.norm();
        let n = Point::new(e.y / len, -e.x / len);
        let theta = n.y.atan2(n.x);
        let d = n.dot(s.a);
        for v in p.vertices() {
            let c = d - n.dot(*v);
            for c in [c, -c] {
                if c.abs() <= r {
                    let a = (c / r).acos();
                    out.push((theta + a).rem_euclid(PI));
                    out.push((theta - a).rem_euclid(PI));
                }
            }
        }
    }
    out
}

fn polygon_chord_power_2(p: &ConvexPolygon) -> f64 {
    // ∫ σ² dL = ∫∫_{W×W} |x − y|⁻¹ dx dy = 2π ∫ γ̄_W(r) dr
    let w = WindowShape::Polygon(p.clone());
    let d = p.diameter();
    let breaks = [0.0, 0.25 * d, 0.5 * d, 0.75 * d, d];
    2.0 * PI * integrate_pieces(&|r| w.gamma_bar(r), &breaks, 1e-9 * p.area() * d).value
}

/// Named contribution to a variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceTerm {
    pub name: String,
    pub value: f64,
}

/// Mean, variance and the decomposition of the variance into terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub mean: f64,
    pub variance: f64,
    pub breakdown: Vec<VarianceTerm>,
    pub quadrature_error: f64,
}

/// Absolute tolerance for the isotropic variance integrals, relative to the
/// scale of the answer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { tol: 1e-10 }
    }
}

/// Bracket of the edge-count variance integrand:
/// `4t²/(πr) − 4t/r² + (2π/r³)(1 − e^{-2tr/π}) = −2π T₃(−2tr/π)/r³`.
pub fn edge_count_kernel(t: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 8.0 * t.powi(3) / (3.0 * PI * PI);
    }
    -2.0 * PI * tail_exp(3, -2.0 * t * r / PI) / r.powi(3)
}

/// `π(1 − e^{-2tr/π})/r`, limit `2t` at 0.
pub fn edge_length_kernel(t: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 2.0 * t;
    }
    -PI * tail_exp(1, -2.0 * t * r / PI) / r
}

fn radial_breaks(t: f64, diam: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    for s in [0.01, 0.1, 1.0, 10.0] {
        let r = s / t;
        if r < diam * 0.999 {
            b.push(r);
        }
    }
    if diam * 0.5 > *b.last().unwrap() {
        b.push(diam * 0.5);
    }
    b.push(diam);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Variance of the number of maximal edges of the isotropic STIT with edge
/// length density `t` in `W`.
pub fn var_edge_count_iso(t: f64, w: &WindowShape, quad: QuadConfig) -> Result<VarianceReport, AnalyticsError> {
    positive("t", t)?;
    let area = w.area();
    let per = w.perimeter();
    let diam = w.diameter();
    let boundary = t * per / PI;
    let area_term = 3.0 * area * t * t / PI;
    let scale = (boundary + area_term).max(1e-300);
    let f = |r: f64| w.gamma_bar(r) * edge_count_kernel(t, r);
    let q = integrate_pieces(&f, &radial_breaks(t, diam), quad.tol * scale);
    let mean = t * per / PI + t * t * area / PI;
    Ok(VarianceReport {
        mean,
        variance: boundary + area_term + q.value,
        breakdown: vec![
            VarianceTerm { name: "boundary".into(), value: boundary },
            VarianceTerm { name: "area".into(), value: area_term },
            VarianceTerm { name: "integral".into(), value: q.value },
        ],
        quadrature_error: q.error,
    })
}

/// Variance of the total edge length in `W`.
pub fn var_edge_length_iso(t: f64, w: &WindowShape, quad: QuadConfig) -> Result<VarianceReport, AnalyticsError> {
    positive("t", t)?;
    let diam = w.diameter();
    let f = |r: f64| w.gamma_bar(r) * edge_length_kernel(t, r);
    let scale = (t * w.area()).max(1e-300);
    let q = integrate_pieces(&f, &radial_breaks(t, diam), quad.tol * scale);
    Ok(VarianceReport {
        mean: t * w.area(),
        variance: q.value,
        breakdown: vec![VarianceTerm { name: "integral".into(), value: q.value }],
        quadrature_error: q.error,
    })
}

/// `Cov(Σ_{Λ[·]}, Σ_1)` for the isotropic STIT in `W`:
/// `(2/π)t·Area(W) + 2∫ γ̄(r) T₂(−2tr/π)/r² dr`.
pub fn cov_hit_count_iso(t: f64, w: &WindowShape, quad: QuadConfig) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    let head = 2.0 / PI * t * w.area();
    let f = |r: f64| {
        if r == 0.0 {
            4.0 * t * t / (PI * PI) * w.gamma_bar(0.0)
        } else {
            2.0 * w.gamma_bar(r) * tail_exp(2, -2.0 * t * r / PI) / (r * r)
        }
    };
    let q = integrate_pieces(&f, &radial_breaks(t, w.diameter()), quad.tol * head.max(1e-300));
    Ok(head + q.value)
}

/// Monte Carlo value with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct McValue {
    pub value: f64,
    pub se: f64,
}

impl McValue {
    /// `|value − target| / sqrt(se² + extra²)`.
    pub fn z(&self, target: f64, extra: f64) -> f64 {
        let s = (self.se * self.se + extra * extra).sqrt();
        if s > 0.0 {
            (self.value - target).abs() / s
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

const CHUNK: usize = 2048;

/// Parallel Monte Carlo: chunk `i` uses its own stream seeded from
/// `(base, i)`, and chunk sums are combined in index order, so the result
/// does not depend on the thread count.
pub(crate) fn parallel_mc<const K: usize, F>(n: usize, base: u64, f: F) -> Result<[McValue; K], AnalyticsError>
where
    F: Fn(&mut ChaCha8Rng) -> Result<[f64; K], AnalyticsError> + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let chunks: Vec<Result<([f64; K], [f64; K]), AnalyticsError>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(base ^ splitmix64(c as u64)));
            let m = CHUNK.min(n - c * CHUNK);
            let mut s = [0.0; K];
            let mut s2 = [0.0; K];
            for _ in 0..m {
                let v = f(&mut rng)?;
                for k in 0..K {
                    s[k] += v[k];
                    s2[k] += v[k] * v[k];
                }
            }
            Ok((s, s2))
        })
        .collect();
    let mut s = [0.0; K];
    let mut s2 = [0.0; K];
    for c in chunks {
        let (a, b) = c?;
        for k in 0..K {
            s[k] += a[k];
            s2[k] += b[k];
        }
    }
    let nf = n as f64;
    let mut out = [McValue::default(); K];
    for k in 0..K {
        let mean = s[k] / nf;
        let var = if n > 1 { ((s2[k] - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        out[k] = McValue {
            value: mean,
            se: (var / nf).sqrt(),
        };
    }
    Ok(out)
}

/// The three second moments for a general driving measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Estimate {
    pub var_sigma_lambda: McValue,
    pub cov_lambda_count: McValue,
    pub var_count: McValue,
}

/// `Var Σ_{Λ[·]}`, `Cov(Σ_{Λ[·]}, Σ_1)` and `Var Σ_1` for `Y(t, W)` by
/// weighted sampling of the segment-intersection measure on `W`.
pub fn theorem1_eval<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    t: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<Theorem1Estimate, AnalyticsError> {
    if n_samples < 1000 {
        return Err(AnalyticsError::TooFewSamples { min: 1000, got: n_samples });
    }
    let base = rng.next_u64();
    let c = lam.point_intersection_density();
    let area = w.area();
    if t <= 0.0 {
        return Ok(Theorem1Estimate {
            var_sigma_lambda: McValue::default(),
            cov_lambda_count: McValue::default(),
            var_count: McValue::default(),
        });
    }
    // fail fast on degenerate measures
    SegmentIntersectionSampler::new(lam, w)?.sample(&mut ChaCha8Rng::seed_from_u64(base))?;
    let [a, b, d] = parallel_mc::<3, _>(n_samples, base, |rng| {
        let mut sampler = SegmentIntersectionSampler::new(lam, w)?;
        let s = sampler.sample(rng)?;
        let l = lam.hit_measure_segment(&s.segment);
        let u = -t * l;
        // T_n(-tλ)/λ^n behaves like (-t)^n/n! as λ → 0
        let ratio = |n: u32| {
            if l == 0.0 {
                let mut v = 1.0;
                for k in 1..=n {
                    v *= -t / k as f64;
                }
                v
            } else {
                tail_exp(n, u) / l.powi(n as i32)
            }
        };
        Ok([-s.weight * ratio(1), s.weight * ratio(2), -2.0 * s.weight * ratio(3)])
    })?;
    Ok(Theorem1Estimate {
        var_sigma_lambda: a,
        cov_lambda_count: McValue {
            value: t * c * area + b.value,
            se: b.se,
        },
        var_count: McValue {
            value: t * lam.hit_measure_convex(w) + 1.5 * t * t * c * area + d.value,
            se: d.se,
        },
    })
}

fn endpoints_in(a: &ConvexPolygon, e: &Segment) -> f64 {
    (a.contains(e.a, 0.0) as u8 + a.contains(e.b, 0.0) as u8) as f64
}

fn hit_in(lam: &DrivingMeasure, a: &ConvexPolygon, e: &Segment) -> f64 {
    a.clip_segment(e).map_or(0.0, |(s, _)| lam.hit_measure_segment(&s))
}

fn length_in(a: &ConvexPolygon, e: &Segment) -> f64 {
    a.clip_segment(e).map_or(0.0, |(s, _)| s.length())
}

fn whole_plane_setup(
    lam: &DrivingMeasure,
    a: &ConvexPolygon,
    b: &ConvexPolygon,
    t: f64,
) -> Result<(ConvexPolygon, f64), AnalyticsError> {
    positive("t", t)?;
    let mut pts = a.vertices().to_vec();
    pts.extend_from_slice(b.vertices());
    let region = ConvexPolygon::hull(&pts)?;
    // endpoint scale: the region size plus the typical edge length
    let per_length = lam.hit_measure_convex(&region) / region.perimeter().max(1e-300);
    let scale = 0.5 * region.diameter() + 1.0 / (t * per_length.max(1e-300));
    Ok((region, scale))
}

/// `Cov(N_v(A), N_v(B))` for the vertex process of the stationary `Y(t)`.
pub fn theorem2_cov<R: Rng + ?Sized>(
    a: &ConvexPolygon,
    b: &ConvexPolygon,
    lam: &DrivingMeasure,
    t: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McValue, AnalyticsError> {
    let (region, scale) = whole_plane_setup(lam, a, b, t)?;
    let sampler = WholePlaneSegmentSampler::new(lam, &region, scale)?;
    let base = rng.next_u64();
    let [v] = parallel_mc::<1, _>(n_samples.max(2), base, |rng| {
        let s = sampler.sample(rng)?;
        let e = &s.segment;
        let l = lam.hit_measure_segment(e);
        let (da, db) = (endpoints_in(a, e), endpoints_in(b, e));
        let (ha, hb) = (hit_in(lam, a, e), hit_in(lam, b, e));
        if da + db + ha + hb == 0.0 {
            return Ok([0.0]);
        }
        let k = 0.5 * da * db * i1(l, t) + (da * hb + ha * db) * i2(l, t) + 4.0 * ha * hb * i3(l, t);
        Ok([s.weight * k])
    })?;
    Ok(v)
}

/// `Cov(N_v(A), ℓ(E ∩ B))`: vertices in `A` against edge length in `B`.
pub fn theorem3_crosscov<R: Rng + ?Sized>(
    a: &ConvexPolygon,
    b: &ConvexPolygon,
    lam: &DrivingMeasure,
    t: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McValue, AnalyticsError> {
    let (region, scale) = whole_plane_setup(lam, a, b, t)?;
    let sampler = WholePlaneSegmentSampler::new(lam, &region, scale)?;
    let base = rng.next_u64();
    let [v] = parallel_mc::<1, _>(n_samples.max(2), base, |rng| {
        let s = sampler.sample(rng)?;
        let e = &s.segment;
        let lb = length_in(b, e);
        if lb == 0.0 {
            return Ok([0.0]);
        }
        let l = lam.hit_measure_segment(e);
        let k = 0.5 * endpoints_in(a, e) * lb * i1(l, t) + hit_in(lam, a, e) * lb * i2(l, t);
        Ok([s.weight * k])
    })?;
    Ok(v)
}

// Isotropic correlation functions. With x = 2tr/π every expression is a
// rational function of x times a difference p(x) − q(x)e^{-x}.

/// Pair-correlation function of the vertices of the isotropic STIT.
pub fn pcf_vertices(t: f64, r: f64) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    positive("r", r)?;
    let x = 2.0 * t * r / PI;
    let n = poly_minus_poly_exp(&[4.0, -8.0, 8.0], &[4.0, -4.0, 2.0], x);
    Ok(1.0 + n / (PI * PI * x.powi(4)))
}

/// Radial distribution function `ρ(r) = λ K'(r) = 4t² r g(r)`.
pub fn radial_distribution(t: f64, r: f64) -> Result<f64, AnalyticsError> {
    Ok(4.0 * t * t * r * pcf_vertices(t, r)?)
}

/// Cross-correlation function of the vertex process and the edge length
/// measure.
pub fn cross_correlation(t: f64, r: f64) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    positive("r", r)?;
    let x = 2.0 * t * r / PI;
    let n = poly_minus_poly_exp(&[-2.0, 4.0], &[-2.0, 2.0], x);
    Ok(1.0 + n / (PI * PI * x.powi(3)))
}

const K_TOL: f64 = 1e-12;

/// Factorial K-function `K̃(R)` (no diagonal atom), by quadrature of the
/// split representation in `I^n(·; t)` at `λ = 2r/π`.
pub fn k_tilde(t: f64, big_r: f64) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    positive("R", big_r)?;
    let lam = |r: f64| 2.0 * r / PI;
    let near = |r: f64| {
        let l = lam(r);
        i1(l, t) + 8.0 / PI * r * i2(l, t) + 16.0 / (PI * PI) * r * r * i3(l, t)
    };
    let far = |r: f64| {
        let l = lam(r);
        8.0 / PI * big_r * i2(l, t) + 32.0 / (PI * PI) * (r * big_r - 0.5 * big_r * big_r) * i3(l, t)
    };
    // absolute error K_TOL·πR² on the result
    let q = integrate_split(&near, &far, t, big_r, K_TOL * PI * big_r * big_r * 0.5 * t.powi(4));
    Ok(PI * big_r * big_r + 2.0 / t.powi(4) * q.value)
}

/// Ripley's K-function with the diagonal atom `(π/(2t²))² 𝒦({0}) = π/(2t²)`
/// included.
pub fn k_function(t: f64, big_r: f64) -> Result<f64, AnalyticsError> {
    Ok(k_tilde(t, big_r)? + k_diagonal_atom(t)?)
}

/// `(π/(2t²))² 𝒦({0})`, the reciprocal vertex intensity.
pub fn k_diagonal_atom(t: f64) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    Ok(PI / (2.0 * t * t))
}

/// Cross K-function of vertices and edge length.
pub fn cross_k(t: f64, big_r: f64) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    positive("R", big_r)?;
    let lam = |r: f64| 2.0 * r / PI;
    let near = |r: f64| {
        let l = lam(r);
        r * i1(l, t) + 2.0 / PI * r * r * i2(l, t)
    };
    let far = |r: f64| {
        let l = lam(r);
        big_r * i1(l, t) + 4.0 / PI * (r * big_r - 0.5 * big_r * big_r) * i2(l, t)
    };
    let q = integrate_split(&near, &far, t, big_r, K_TOL * PI * big_r * big_r * 0.25 * PI * t.powi(3));
    Ok(PI * big_r * big_r + 4.0 / (PI * t.powi(3)) * q.value)
}

fn integrate_split<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(near: &F, far: &G, t: f64, big_r: f64, tol: f64) -> Quad {
    // pieces of length ~1/t keep the panels resolving the e^{-2tr/π} scale
    let step = 1.0 / t;
    let mut breaks = vec![0.0];
    let mut x = step;
    while x < big_r {
        breaks.push(x);
        x += step;
    }
    breaks.push(big_r);
    let mut q = integrate_pieces(near, &breaks, 0.5 * tol);
    let end = big_r.max(20.0 / t);
    if end > big_r {
        q = q + integrate(far, big_r, end, 0.25 * tol);
    }
    q + integrate_to_infinity(far, end, 0.25 * tol)
}

/// Point processes/tessellations for which comparison curves exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Model {
    Stit,
    Plt,
    Pvt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "g")]
    G,
    K,
    /// Factorial (diagonal-free) K-function.
    #[serde(rename = "K_tilde")]
    KTilde,
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "g12")]
    G12,
    K12,
    #[serde(rename = "plt_g")]
    PltG,
    #[serde(rename = "plt_rho")]
    PltRho,
    #[serde(rename = "plt_g12")]
    PltG12,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Self::G => "g",
            Self::K => "K",
            Self::KTilde => "K_tilde",
            Self::Rho => "rho",
            Self::G12 => "g12",
            Self::K12 => "K12",
            Self::PltG => "plt_g",
            Self::PltRho => "plt_rho",
            Self::PltG12 => "plt_g12",
        }
    }

    pub fn model(self) -> Model {
        match self {
            Self::PltG | Self::PltRho | Self::PltG12 => Model::Plt,
            _ => Model::Stit,
        }
    }
}

/// Tabulated second-order function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCurve {
    pub statistic: Statistic,
    pub t: f64,
    pub grid: Vec<(f64, f64)>,
}

impl SecondOrderCurve {
    pub fn model(&self) -> Model {
        self.statistic.model()
    }

    /// `r,value` rows with CRLF line ends.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,value\r\n");
        for (r, v) in &self.grid {
            s.push_str(&format!("{r},{v}\r\n"));
        }
        s
    }
}

pub fn plt_pcf(t: f64, r: f64) -> Result<f64, AnalyticsError> {
    Ok(1.0 + 4.0 / (PI * positive("t", t)? * positive("r", r)?))
}

pub fn plt_radial_distribution(t: f64, r: f64) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    positive("r", r)?;
    Ok(2.0 * t * t * r + 8.0 * t / PI)
}

pub fn plt_cross_correlation(t: f64, r: f64) -> Result<f64, AnalyticsError> {
    Ok(1.0 + 2.0 / (PI * positive("t", t)? * positive("r", r)?))
}

/// Second-order function of `model` on `grid`.
pub fn comparison_curves(
    model: Model,
    statistic: Statistic,
    t: f64,
    grid: &[f64],
) -> Result<SecondOrderCurve, AnalyticsError> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AnalyticsError::BadGrid);
    }
    let plt = |s: Statistic| matches!(s, Statistic::G | Statistic::Rho | Statistic::G12) || s.model() == Model::Plt;
    let (f, stat): (fn(f64, f64) -> Result<f64, AnalyticsError>, Statistic) = match (model, statistic) {
        (Model::Stit, Statistic::G) => (pcf_vertices, Statistic::G),
        (Model::Stit, Statistic::K) => (k_function, Statistic::K),
        (Model::Stit, Statistic::KTilde) => (k_tilde, Statistic::KTilde),
        (Model::Stit, Statistic::Rho) => (radial_distribution, Statistic::Rho),
        (Model::Stit, Statistic::G12) => (cross_correlation, Statistic::G12),
        (Model::Stit, Statistic::K12) => (cross_k, Statistic::K12),
        (Model::Plt, s) if plt(s) => match s {
            Statistic::G | Statistic::PltG => (plt_pcf, Statistic::PltG),
            Statistic::Rho | Statistic::PltRho => (plt_radial_distribution, Statistic::PltRho),
            _ => (plt_cross_correlation, Statistic::PltG12),
        },
        _ => return Err(AnalyticsError::Unsupported { model, statistic }),
    };
    let grid = grid
        .iter()
        .map(|&r| f(t, r).map(|v| (r, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SecondOrderCurve { statistic: stat, t, grid })
}

/// Leading large-`R` asymptotics of `Var N_v(W_R)` for `W_R = R·W`.
pub fn asymptotic_variance(model: Model, t: f64, w: &WindowShape, big_r: f64) -> Result<f64, AnalyticsError> {
    positive("t", t)?;
    positive("R", big_r)?;
    Ok(match model {
        Model::Stit => 16.0 / PI * w.area() * t * t * big_r * big_r * big_r.ln(),
        Model::Plt => 4.0 / (PI * PI) * t.powi(3) * big_r.powi(3) * w.chord_power_integral_2(),
        Model::Pvt => 2.0 * t * t * big_r * big_r * w.area(),
    })
}

/// Leading asymptotics of `Var Σ_1(Y(t, W_R))` for the isotropic STIT.
pub fn asymptotic_edge_count_variance(t: f64, w: &WindowShape, big_r: f64) -> Result<f64, AnalyticsError> {
    Ok(asymptotic_variance(Model::Stit, t, w, big_r)? / 4.0)
}
