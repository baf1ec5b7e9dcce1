//! Replicated experiments and spatial estimators: moments, pair correlation,
//! K and cross-K, the Poisson chord and same-cell tests, CLT diagnostics and
//! the consistency/iteration checks.
//!
//! Replication `i` of an experiment with base seed `b` always uses the seed
//! `rep_seed(b, i)`, and results are collected in index order, so reports do
//! not depend on the thread count.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
use thiserror::Error;

use crate::analytics::{
    cov_hit_count_iso, var_edge_length_iso, AnalyticsError, QuadConfig, SecondOrderCurve, Statistic, WindowShape,
};
use crate::functionals::{vertices, FunctionalError, VertexProcess};
use crate::geometry::{ConvexPolygon, GeometryError, LineP, Point, Segment};
use crate::line_measure::DrivingMeasure;
use crate::mnw::{
    construct_seeded, iterate, splitmix64, stit_filler, stit_filler_bounding, ConstructOptions, MnwError, Tessellation,
};
use crate::stats::{bootstrap_se, bootstrap_se_pairs, correlation, pairwise_sum, regression_slope, McEstimate, Moments};

/// Bootstrap resamples used for variance standard errors.
pub const N_BOOT: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("need at least {min} replications, got {got}")]
    TooFewReps { min: usize, got: usize },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
    #[error("grid must be non-empty, positive and increasing")]
    BadGrid,
    #[error("time grid must lie in [0, 1]")]
    BadTimeGrid,
    #[error("line does not meet the window")]
    LineMissesWindow,
    #[error("pair at distance {0} does not fit strictly inside the window")]
    PairOutsideWindow(f64),
    #[error("scale factor must be at least e, got {0}")]
    ScaleTooSmall(f64),
    #[error("window is too small for the boundary buffer")]
    EmptyBuffer,
    #[error(transparent)]
    Mnw(#[from] MnwError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// Seed of replication `i`.
pub fn rep_seed(base: u64, i: usize) -> u64 {
    splitmix64(base ^ splitmix64(i as u64 ^ 0x5EED_0F_4E_9A_11))
}

/// Runs `f(rep_seed(base, i))` for `i < n` in parallel, results in order.
pub fn replicate<T, F>(n: usize, base: u64, f: F) -> Result<Vec<T>, EstimatorError>
where
    T: Send,
    F: Fn(u64) -> Result<T, EstimatorError> + Sync,
{
    (0..n).into_par_iter().map(|i| f(rep_seed(base, i))).collect()
}

fn simulate(lam: &DrivingMeasure, w: &ConvexPolygon, t: f64, seed: u64) -> Result<Tessellation, EstimatorError> {
    Ok(construct_seeded(lam, w, t, seed, ConstructOptions::default())?)
}

fn need_reps(n: usize, min: usize) -> Result<(), EstimatorError> {
    if n < min {
        Err(EstimatorError::TooFewReps { min, got: n })
    } else {
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<(), EstimatorError> {
    if grid.is_empty() || !(grid[0] > 0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|r| !r.is_finite()) {
        Err(EstimatorError::BadGrid)
    } else {
        Ok(())
    }
}

/// Scalar edge statistics of a realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentStatistic {
    /// `Σ_1`, the number of maximal edges.
    EdgeCount,
    /// `Σ_ℓ`, the total edge length.
    EdgeLength,
    /// `Σ_{Λ[·]}`, the summed hit measure of the edges.
    HitMeasure,
    /// `N_v`, the number of interior vertices.
    VertexCount,
}

impl MomentStatistic {
    pub const ALL: [MomentStatistic; 4] = [Self::EdgeCount, Self::EdgeLength, Self::HitMeasure, Self::VertexCount];

    pub fn eval(self, y: &Tessellation) -> f64 {
        match self {
            Self::EdgeCount => y.edges.len() as f64,
            Self::EdgeLength => y.total_length(),
            Self::HitMeasure => y.edges.iter().map(|e| y.lam.hit_measure_segment(&e.segment)).sum(),
            Self::VertexCount => vertices(y).len() as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::EdgeCount => "edge_count",
            Self::EdgeLength => "edge_length",
            Self::HitMeasure => "hit_measure",
            Self::VertexCount => "vertex_count",
        }
    }
}

/// Per-replication values of several statistics from the same realizations.
pub fn sample_statistics<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    t: f64,
    stats: &[MomentStatistic],
    n_reps: usize,
    rng: &mut R,
) -> Result<(u64, Vec<Vec<f64>>), EstimatorError> {
    let base = rng.next_u64();
    let rows = replicate(n_reps, base, |seed| {
        let y = simulate(lam, w, t, seed)?;
        Ok(stats.iter().map(|s| s.eval(&y)).collect::<Vec<f64>>())
    })?;
    let cols = (0..stats.len()).map(|k| rows.iter().map(|r| r[k]).collect()).collect();
    Ok((base, cols))
}

/// Mean and variance of `statistic` over `n_reps` independent realizations
/// of `Y(t, W)`, with a bootstrap standard error for the variance.
pub fn mc_moments<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    t: f64,
    statistic: MomentStatistic,
    n_reps: usize,
    rng: &mut R,
) -> Result<McEstimate, EstimatorError> {
    need_reps(n_reps, 2)?;
    let (base, cols) = sample_statistics(lam, w, t, &[statistic], n_reps, rng)?;
    Ok(McEstimate::with_bootstrap(&cols[0], N_BOOT, base))
}

fn epanechnikov(u: f64, h: f64) -> f64 {
    let v = u / h;
    if v.abs() < 1.0 {
        0.75 / h * (1.0 - v * v)
    } else {
        0.0
    }
}

/// Default bandwidth `0.15/√λ`.
pub fn default_bandwidth(intensity: f64) -> f64 {
    0.15 / intensity.sqrt()
}

/// Rotation-averaged set covariance `γ̄_W` tabulated on `[0, diam W]`,
/// the weight of the isotropic edge correction. Unlike `|W ∩ (W + z)|` it
/// stays positive up to the diameter.
pub struct IsoCovariance {
    step: f64,
    values: Vec<f64>,
}

impl IsoCovariance {
    const NODES: usize = 1024;

    pub fn new(w: &ConvexPolygon) -> Self {
        let shape = WindowShape::Polygon(w.clone());
        let step = w.diameter() / Self::NODES as f64;
        let values = (0..=Self::NODES).map(|i| shape.gamma_bar(i as f64 * step)).collect();
        Self { step, values }
    }

    /// Linear interpolation; zero beyond the diameter.
    pub fn eval(&self, r: f64) -> f64 {
        let x = r / self.step;
        let i = x.floor() as usize;
        if i >= Self::NODES {
            return 0.0;
        }
        let f = x - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    fn weight(&self, r: f64) -> f64 {
        let g = self.eval(r);
        if g > 0.0 { 1.0 / g } else { 0.0 }
    }
}

/// Unnormalized translation-corrected sums of one pattern.
#[derive(Clone, Debug, Default)]
struct PairSums {
    values: Vec<f64>,
    n_points: usize,
    area: f64,
}

/// `Σ_{i≠j} k_h(r − |x_i − x_j|) / (2πr γ̄_{W'}(|x_i − x_j|))` over points
/// in `W' = W ⊖ h`.
fn pcf_sums(points: &[Point], inner: &ConvexPolygon, cov: &IsoCovariance, h: f64, grid: &[f64]) -> PairSums {
    let pts: Vec<Point> = points.iter().copied().filter(|p| inner.contains(*p, 0.0)).collect();
    let r_max = grid.last().copied().unwrap_or(0.0) + h;
    let mut values = vec![0.0; grid.len()];
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = pts[i].dist(pts[j]);
            if d >= r_max {
                continue;
            }
            let wt = cov.weight(d);
            for (v, &r) in values.iter_mut().zip(grid) {
                *v += 2.0 * epanechnikov(r - d, h) * wt;
            }
        }
    }
    for (v, &r) in values.iter_mut().zip(grid) {
        *v /= 2.0 * PI * r;
    }
    PairSums { values, n_points: pts.len(), area: inner.area() }
}

/// `Σ_{i≠j} 1{|x_i − x_j| ≤ r} / γ̄_W(|x_i − x_j|)`.
fn k_sums(points: &[Point], window: &ConvexPolygon, cov: &IsoCovariance, grid: &[f64]) -> PairSums {
    let r_max = grid.last().copied().unwrap_or(0.0);
    let mut values = vec![0.0; grid.len()];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].dist(points[j]);
            if d > r_max {
                continue;
            }
            let wt = 2.0 * cov.weight(d);
            let first = grid.partition_point(|&r| r < d);
            for v in &mut values[first..] {
                *v += wt;
            }
        }
    }
    PairSums { values, n_points: points.len(), area: window.area() }
}

/// Part of `seg` inside the closed disk `B(c, r)`.
fn disk_piece(seg: &Segment, c: Point, r: f64) -> Option<Segment> {
    let d = seg.b - seg.a;
    let len = d.norm();
    if len == 0.0 {
        return None;
    }
    let u = d * (1.0 / len);
    let w = seg.a - c;
    let proj = w.dot(u);
    let h2 = r * r - (w.dot(w) - proj * proj);
    if h2 <= 0.0 {
        return None;
    }
    let h = h2.sqrt();
    let lo = (-proj - h).max(0.0);
    let hi = (-proj + h).min(len);
    (hi > lo).then(|| Segment::new(seg.a + u * lo, seg.a + u * hi))
}

/// `Σ_x ∫_{E ∩ B(x, r)} 1/γ̄_W(|y − x|) ℓ(dy)` over vertices `x`. Each edge
/// is cut at the circles `|y − x| = r` and every piece is integrated once
/// with a Gauss–Legendre rule.
fn cross_sums(points: &[Point], edges: &[Segment], cov: &IsoCovariance, grid: &[f64], rule: &GaussLegendre) -> Vec<f64> {
    let mut values = vec![0.0; grid.len()];
    let r_max = *grid.last().unwrap();
    let mut breaks = Vec::new();
    for &x in points {
        for e in edges {
            let Some(p) = disk_piece(e, x, r_max) else { continue };
            let len = p.length();
            let dir = (p.b - p.a) * (1.0 / len);
            let z0 = p.a - x;
            let foot = -z0.dot(dir);
            let perp2 = (z0.dot(z0) - foot * foot).max(0.0);
            breaks.clear();
            breaks.extend([0.0, len]);
            if foot > 0.0 && foot < len {
                breaks.push(foot);
            }
            for &r in grid {
                let h2 = r * r - perp2;
                if h2 > 0.0 {
                    let h = h2.sqrt();
                    breaks.extend([foot - h, foot + h].into_iter().filter(|&s| s > 0.0 && s < len));
                }
            }
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| *a - *b < 1e-13);
            let perp = perp2.sqrt();
            for wdw in breaks.windows(2) {
                let (a, b) = (wdw[0], wdw[1]);
                let reach = (z0 + dir * a).norm().max((z0 + dir * b).norm());
                let first = grid.partition_point(|&r| r < reach * (1.0 - 1e-12));
                if first == grid.len() {
                    continue;
                }
                let v = integrate_offset(cov, rule, a - foot, b - foot, perp);
                for acc in &mut values[first..] {
                    *acc += v;
                }
            }
        }
    }
    values
}

/// `∫_{u_a}^{u_b} w(√(p² + u²)) du` for `u_a, u_b` on one side of 0, in the
/// variable `u = p sinh v` where the integrand is smooth.
fn integrate_offset(cov: &IsoCovariance, rule: &GaussLegendre, ua: f64, ub: f64, p: f64) -> f64 {
    if p <= 1e-12 * ua.abs().max(ub.abs()) {
        return rule.integrate(ua, ub, |u| cov.weight(u.abs()));
    }
    let (va, vb) = ((ua / p).asinh(), (ub / p).asinh());
    let panels = (vb - va).abs().ceil().max(1.0) as usize;
    let dv = (vb - va) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = va + k as f64 * dv;
            rule.integrate(lo, lo + dv, |v| {
                let c = p * v.cosh();
                cov.weight(c) * c
            })
        })
        .sum()
}

fn cross_rule() -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(6).unwrap())
}

/// Translation-corrected Epanechnikov estimate of the pair-correlation
/// function, ignoring points within `h` of the boundary. `t` on the curve
/// is the plug-in `√(πλ̂/2)`.
pub fn pcf_estimator(points: &VertexProcess, bandwidth: Option<f64>, r_grid: &[f64]) -> Result<SecondOrderCurve, EstimatorError> {
    check_grid(r_grid)?;
    if points.len() < 2 {
        return Err(EstimatorError::TooFewPoints(points.len()));
    }
    let h = bandwidth.unwrap_or_else(|| default_bandwidth(points.intensity()));
    if !(h > 0.0) {
        return Err(EstimatorError::BadBandwidth(h));
    }
    let inner = points.window.erode(h).ok_or(EstimatorError::EmptyBuffer)?;
    let s = pcf_sums(&points.points, &inner, &IsoCovariance::new(&inner), h, r_grid);
    if s.n_points < 2 {
        return Err(EstimatorError::TooFewPoints(s.n_points));
    }
    let lam = s.n_points as f64 / s.area;
    Ok(curve(Statistic::G, plug_in_t(points.intensity()), r_grid, &s.values, lam * lam))
}

/// Translation-corrected estimate of the factorial K-function.
pub fn k_estimator(points: &VertexProcess, r_grid: &[f64]) -> Result<SecondOrderCurve, EstimatorError> {
    check_grid(r_grid)?;
    if points.len() < 2 {
        return Err(EstimatorError::TooFewPoints(points.len()));
    }
    let s = k_sums(&points.points, &points.window, &IsoCovariance::new(&points.window), r_grid);
    let lam = points.intensity();
    Ok(curve(Statistic::KTilde, plug_in_t(lam), r_grid, &s.values, lam * lam))
}

/// Translation-corrected cross K-function of the vertices and the edge
/// length measure of `y`.
pub fn cross_k_estimator(points: &VertexProcess, y: &Tessellation, r_grid: &[f64]) -> Result<SecondOrderCurve, EstimatorError> {
    check_grid(r_grid)?;
    if points.is_empty() || y.edges.is_empty() {
        return Err(EstimatorError::TooFewPoints(points.len()));
    }
    let edges: Vec<Segment> = y.edges.iter().map(|e| e.segment).collect();
    let v = cross_sums(&points.points, &edges, &IsoCovariance::new(&y.window), r_grid, &cross_rule());
    let area = y.window.area();
    let norm = points.len() as f64 / area * (y.total_length() / area);
    Ok(curve(Statistic::K12, plug_in_t(points.intensity()), r_grid, &v, norm))
}

fn plug_in_t(vertex_intensity: f64) -> f64 {
    (PI * vertex_intensity / 2.0).sqrt()
}

fn curve(statistic: Statistic, t: f64, grid: &[f64], values: &[f64], norm: f64) -> SecondOrderCurve {
    SecondOrderCurve {
        statistic,
        t,
        grid: grid.iter().zip(values).map(|(&r, &v)| (r, v / norm)).collect(),
    }
}

/// Pooled second-order estimates over independent realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledSecondOrder {
    pub n_reps: usize,
    pub t: f64,
    pub bandwidth: f64,
    /// Vertex intensity `N_v / Area(W)` per replication.
    pub vertex_intensity: McEstimate,
    /// Edge length per unit area per replication.
    pub length_intensity: McEstimate,
    pub pcf: SecondOrderCurve,
    /// Jackknife standard errors over replications, per grid point.
    pub pcf_se: Vec<f64>,
    pub k_tilde: SecondOrderCurve,
    pub k_tilde_se: Vec<f64>,
    pub cross_k: SecondOrderCurve,
    pub cross_k_se: Vec<f64>,
}

/// Simulates `n_reps` copies of `Y(t, W)` and pools the pcf, K̃ and cross-K
/// estimators: per-replication sums are averaged and divided by the pooled
/// intensities.
pub fn pooled_second_order<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    t: f64,
    n_reps: usize,
    r_grid: &[f64],
    bandwidth: Option<f64>,
    rng: &mut R,
) -> Result<PooledSecondOrder, EstimatorError> {
    need_reps(n_reps, 2)?;
    check_grid(r_grid)?;
    let base = rng.next_u64();
    let reps = replicate(n_reps, base, |seed| {
        let y = simulate(lam, w, t, seed)?;
        let v = vertices(&y);
        let edges: Vec<Segment> = y.edges.iter().map(|e| e.segment).collect();
        Ok((v.points, edges))
    })?;
    let area = w.area();
    let counts: Vec<f64> = reps.iter().map(|(p, _)| p.len() as f64 / area).collect();
    let lengths: Vec<f64> = reps.iter().map(|(_, e)| e.iter().map(|s| s.length()).sum::<f64>() / area).collect();
    let vertex_intensity = McEstimate::with_bootstrap(&counts, N_BOOT, base);
    let length_intensity = McEstimate::with_bootstrap(&lengths, N_BOOT, base ^ 1);
    let lam1 = vertex_intensity.mean;
    if !(lam1 > 0.0) {
        return Err(EstimatorError::TooFewPoints(0));
    }
    let h = bandwidth.unwrap_or_else(|| default_bandwidth(lam1));
    if !(h > 0.0) {
        return Err(EstimatorError::BadBandwidth(h));
    }
    let rule = cross_rule();
    let inner = w.erode(h).ok_or(EstimatorError::EmptyBuffer)?;
    let (cov_inner, cov) = (IsoCovariance::new(&inner), IsoCovariance::new(w));
    let per_rep: Vec<(PairSums, PairSums, Vec<f64>)> = reps
        .par_iter()
        .map(|(p, e)| {
            (
                pcf_sums(p, &inner, &cov_inner, h, r_grid),
                k_sums(p, w, &cov, r_grid),
                cross_sums(p, e, &cov, r_grid, &rule),
            )
        })
        .collect();
    let inner_area = per_rep[0].0.area;
    let inner: Vec<f64> = per_rep.iter().map(|r| r.0.n_points as f64).collect();
    let total: Vec<f64> = reps.iter().map(|(p, _)| p.len() as f64).collect();
    let length: Vec<f64> = lengths.iter().map(|l| l * area).collect();
    let nk = r_grid.len();
    let col = |f: &dyn Fn(&(PairSums, PairSums, Vec<f64>)) -> f64| -> Vec<f64> { per_rep.iter().map(f).collect() };
    let g: Vec<(f64, f64)> = (0..nk)
        .map(|k| ratio_jackknife(&col(&|r| r.0.values[k]), &inner, &inner, inner_area * inner_area))
        .collect();
    let kt: Vec<(f64, f64)> = (0..nk)
        .map(|k| ratio_jackknife(&col(&|r| r.1.values[k]), &total, &total, area * area))
        .collect();
    let ck: Vec<(f64, f64)> = (0..nk).map(|k| ratio_jackknife(&col(&|r| r.2[k]), &total, &length, area * area)).collect();
    let pack = |statistic: Statistic, v: &[(f64, f64)]| {
        (
            SecondOrderCurve { statistic, t, grid: r_grid.iter().zip(v).map(|(&r, p)| (r, p.0)).collect() },
            v.iter().map(|p| p.1).collect(),
        )
    };
    let (pcf, pcf_se) = pack(Statistic::G, &g);
    let (k_tilde, k_tilde_se) = pack(Statistic::KTilde, &kt);
    let (cross_k, cross_k_se) = pack(Statistic::K12, &ck);
    Ok(PooledSecondOrder {
        n_reps,
        t,
        bandwidth: h,
        vertex_intensity,
        length_intensity,
        pcf,
        pcf_se,
        k_tilde,
        k_tilde_se,
        cross_k,
        cross_k_se,
    })
}

/// `scale · mean(num) / (mean(a) mean(b))` with its jackknife standard error
/// over replications.
fn ratio_jackknife(num: &[f64], a: &[f64], b: &[f64], scale: f64) -> (f64, f64) {
    let n = num.len();
    let nf = n as f64;
    let (sn, sa, sb) = (pairwise_sum(num), pairwise_sum(a), pairwise_sum(b));
    let est = |x: f64, y: f64, z: f64, m: f64| {
        let d = (y / m) * (z / m);
        if d > 0.0 { scale * (x / m) / d } else { f64::NAN }
    };
    let full = est(sn, sa, sb, nf);
    if n < 2 {
        return (full, f64::NAN);
    }
    let loo: Vec<f64> = (0..n).map(|i| est(sn - num[i], sa - a[i], sb - b[i], nf - 1.0)).collect();
    let m = pairwise_sum(&loo) / nf;
    let ss: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    (full, ((nf - 1.0) / nf * ss).sqrt())
}

/// Counts of the section of `Y(t, W)` with a fixed line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordTestReport {
    pub n_reps: usize,
    pub t: f64,
    pub chord_length: f64,
    /// `tΛ([L ∩ W])`.
    pub expected_mean: f64,
    pub mean: f64,
    pub se_mean: f64,
    /// Sample variance over sample mean.
    pub dispersion: f64,
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    /// `histogram[k]` = replications with `k` crossings.
    pub histogram: Vec<usize>,
    pub seed: u64,
}

/// Poisson check of the crossings of `Y(t, W)` with the chord `L ∩ W`.
pub fn chord_poisson_test<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    t: f64,
    line: &LineP,
    n_reps: usize,
    rng: &mut R,
) -> Result<ChordTestReport, EstimatorError> {
    need_reps(n_reps, 2)?;
    let chord = w.clip_line(line).ok_or(EstimatorError::LineMissesWindow)?;
    let base = rng.next_u64();
    let counts = replicate(n_reps, base, |seed| Ok(simulate(lam, w, t, seed)?.section_with_line(line).len()))?;
    let x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let m = Moments::of(&x);
    let mu = t * lam.hit_measure_segment(&chord);
    let k_max = counts.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0usize; k_max + 1];
    for &c in &counts {
        histogram[c] += 1;
    }
    let (chi_square, df, p_value) = poisson_gof(&histogram, mu, n_reps);
    Ok(ChordTestReport {
        n_reps,
        t,
        chord_length: chord.length(),
        expected_mean: mu,
        mean: m.mean,
        se_mean: m.se_mean(),
        dispersion: if m.mean > 0.0 { m.var / m.mean } else { 0.0 },
        chi_square,
        df,
        p_value,
        histogram,
        seed: base,
    })
}

/// Pearson chi-square against `Poisson(mu)`; consecutive counts are pooled
/// until each bin expects at least 5, the last bin takes the whole tail.
fn poisson_gof(histogram: &[usize], mu: f64, n: usize) -> (f64, usize, f64) {
    let Ok(pois) = Poisson::new(mu) else {
        // mu = 0: every count must be 0
        let bad = histogram.iter().skip(1).any(|&h| h > 0);
        return if bad { (f64::INFINITY, 0, 0.0) } else { (0.0, 0, 1.0) };
    };
    let nf = n as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut exp, mut obs, mut cum) = (0.0, 0.0, 0.0);
    let mut k = 0u64;
    loop {
        let p = pois.pmf(k);
        cum += p;
        exp += nf * p;
        obs += histogram.get(k as usize).copied().unwrap_or(0) as f64;
        k += 1;
        let tail = nf * (1.0 - cum).max(0.0);
        if exp >= 5.0 && tail >= 5.0 {
            bins.push((obs, exp));
            exp = 0.0;
            obs = 0.0;
        } else if tail < 5.0 {
            let rest: usize = histogram.iter().skip(k as usize).sum();
            exp += tail;
            obs += rest as f64;
            match bins.last_mut() {
                Some(last) if exp < 5.0 => {
                    last.0 += obs;
                    last.1 += exp;
                }
                _ => bins.push((obs, exp)),
            }
            break;
        }
    }
    let chi: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = bins.len().saturating_sub(1);
    let p = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).map_or(f64::NAN, |c| c.sf(chi))
    };
    (chi, df, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SameCellRow {
    pub distance: f64,
    /// `exp(−tΛ([x̄y]))`.
    pub target: f64,
    pub probability: f64,
    pub se: f64,
    pub z: f64,
    /// Replications used; those with a point on an edge are dropped.
    pub n_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SameCellReport {
    pub t: f64,
    pub rows: Vec<SameCellRow>,
    /// Empirical probabilities non-increasing in distance.
    pub monotone: bool,
    pub seed: u64,
}

/// Probability that two points at each distance, placed symmetrically about
/// the window centroid along the x-axis, lie in the same cell.
pub fn same_cell_test<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    t: f64,
    distances: &[f64],
    n_reps: usize,
    rng: &mut R,
) -> Result<SameCellReport, EstimatorError> {
    need_reps(n_reps, 2)?;
    let c = w.centroid();
    let mut pairs = Vec::with_capacity(distances.len());
    for &d in distances {
        let half = Point::new(0.5 * d, 0.0);
        let (x, y) = (c - half, c + half);
        if !(d >= 0.0) || !w.contains_strict(x, 1e-9) || !w.contains_strict(y, 1e-9) {
            return Err(EstimatorError::PairOutsideWindow(d));
        }
        pairs.push((d, x, y));
    }
    let base = rng.next_u64();
    let hits = replicate(n_reps, base, |seed| {
        let tess = simulate(lam, w, t, seed)?;
        Ok(pairs
            .iter()
            .map(|&(_, x, y)| match tess.same_cell(x, y) {
                Ok(b) => Some(b),
                Err(MnwError::PointOnEdge) => None,
                Err(e) => panic!("{e}"),
            })
            .collect::<Vec<Option<bool>>>())
    })?;
    let rows: Vec<SameCellRow> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(d, x, y))| {
            let used: Vec<bool> = hits.iter().filter_map(|h| h[k]).collect();
            let n = used.len();
            let p = used.iter().filter(|&&b| b).count() as f64 / n.max(1) as f64;
            let target = if d == 0.0 { 1.0 } else { (-t * lam.hit_measure_segment(&Segment::new(x, y))).exp() };
            let se = (target * (1.0 - target) / n.max(1) as f64).sqrt();
            let z = if se > 0.0 { (p - target) / se } else if p == target { 0.0 } else { f64::INFINITY };
            SameCellRow { distance: d, target, probability: p, se, z, n_used: n }
        })
        .collect();
    let mut order: Vec<&SameCellRow> = rows.iter().collect();
    order.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let monotone = order.windows(2).all(|w| w[1].probability <= w[0].probability);
    Ok(SameCellReport { t, rows, monotone, seed: base })
}

/// Rescaled, centred `(L_t, C_t)` paths of the isotropic STIT on `R·W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledPaths {
    #[serde(rename = "R")]
    pub r: f64,
    pub window: ConvexPolygon,
    pub t_grid: Vec<f64>,
    /// `samples[rep][k] = (L_{t_k}, C_{t_k})`.
    pub samples: Vec<Vec<(f64, f64)>>,
    pub seed: u64,
}

/// Simulates `Y(max t_grid + 1/log R, R·W)` for the isotropic measure with
/// `τ = 1` and reads off, at each grid time `t`, the hit-measure sum and the
/// edge count at time `u = t + 1/log R`, centred by their exact means and
/// divided by `R √log R`.
pub fn clt_paths<R: Rng + ?Sized>(
    w: &ConvexPolygon,
    big_r: f64,
    t_grid: &[f64],
    n_reps: usize,
    rng: &mut R,
) -> Result<RescaledPaths, EstimatorError> {
    if !(big_r >= std::f64::consts::E) {
        return Err(EstimatorError::ScaleTooSmall(big_r));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(EstimatorError::BadTimeGrid);
    }
    need_reps(n_reps, 2)?;
    let lam = DrivingMeasure::isotropic(1.0);
    let wr = w.scale(big_r);
    let area = wr.area();
    let hit_w = lam.hit_measure_convex(&wr);
    let c = lam.point_intersection_density();
    let shift = 1.0 / big_r.ln();
    let norm = big_r * big_r.ln().sqrt();
    let horizon = t_grid.iter().copied().fold(0.0, f64::max) + shift;
    let base = rng.next_u64();
    let samples = replicate(n_reps, base, |seed| {
        let y = simulate(&lam, &wr, horizon, seed)?;
        let mut hit = Vec::with_capacity(y.edges.len() + 1);
        hit.push(0.0);
        for e in &y.edges {
            hit.push(hit.last().unwrap() + lam.hit_measure_segment(&e.segment));
        }
        Ok(t_grid
            .iter()
            .map(|&t| {
                let u = t + shift;
                let k = y.edges.partition_point(|e| e.birth_time <= u);
                let l = (hit[k] - u * c * area) / norm;
                let cnt = (k as f64 - u * hit_w - 0.5 * u * u * c * area) / norm;
                (l, cnt)
            })
            .collect::<Vec<_>>())
    })?;
    Ok(RescaledPaths { r: big_r, window: w.clone(), t_grid: t_grid.to_vec(), samples, seed: base })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub n_reps: usize,
    /// Grid time used as `t = 1` (the largest).
    pub t_end: f64,
    pub var_l1: f64,
    pub var_l1_se: f64,
    /// Limit `4 Area(W)/π`.
    pub var_target: f64,
    pub var_ratio: f64,
    /// Exact `Var L_{t_end}` at this `R`.
    pub var_finite_r: f64,
    /// Pooled least-squares slope of `C_t` on `t·L_t`.
    pub slope: Option<f64>,
    pub slope_se: f64,
    /// Exact population slope at this `R`.
    pub slope_finite_r: f64,
    /// Times of the correlated pair (smallest and largest grid time).
    pub corr_times: (f64, f64),
    pub cross_time_corr: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Summary statistics of rescaled paths, with the exact finite-`R` values of
/// `Var L_1` and of the regression slope for comparison.
pub fn clt_diagnostics(paths: &RescaledPaths) -> Result<CltReport, EstimatorError> {
    let n = paths.samples.len();
    need_reps(n, 2)?;
    let grid = &paths.t_grid;
    let k_end = (0..grid.len()).max_by(|&a, &b| grid[a].total_cmp(&grid[b])).unwrap();
    let k_start = (0..grid.len()).min_by(|&a, &b| grid[a].total_cmp(&grid[b])).unwrap();
    let l_end: Vec<f64> = paths.samples.iter().map(|s| s[k_end].0).collect();
    let l_start: Vec<f64> = paths.samples.iter().map(|s| s[k_start].0).collect();
    let m = Moments::of(&l_end);
    let var_target = 4.0 * paths.window.area() / PI;
    let pooled = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * grid.len());
        let mut y = Vec::with_capacity(idx.len() * grid.len());
        for &i in idx {
            for (k, &(l, c)) in paths.samples[i].iter().enumerate() {
                x.push(grid[k] * l);
                y.push(c);
            }
        }
        (x, y)
    };
    let all: Vec<usize> = (0..n).collect();
    let (x, y) = pooled(&all);
    let slope = regression_slope(&x, &y);
    let slope_se = slope_bootstrap_se(n, paths.seed, &pooled);

    let big_r = paths.r;
    let wr = WindowShape::Polygon(paths.window.scale(big_r));
    let norm2 = big_r * big_r * big_r.ln();
    let shift = 1.0 / big_r.ln();
    let quad = QuadConfig { tol: 1e-8 };
    let var_l = |u: f64| -> Result<f64, EstimatorError> {
        Ok((2.0 / PI).powi(2) * var_edge_length_iso(u, &wr, quad)?.variance / norm2)
    };
    let (mut num, mut den) = (0.0, 0.0);
    for &t in grid {
        let u = t + shift;
        num += t * cov_hit_count_iso(u, &wr, quad)? / norm2;
        den += t * t * var_l(u)?;
    }
    Ok(CltReport {
        r: big_r,
        n_reps: n,
        t_end: grid[k_end],
        var_l1: m.var,
        var_l1_se: bootstrap_se(&l_end, N_BOOT, paths.seed ^ 0xC17, |s| Moments::of(s).var),
        var_target,
        var_ratio: m.var / var_target,
        var_finite_r: var_l(grid[k_end] + shift)?,
        slope,
        slope_se,
        slope_finite_r: if den > 0.0 { num / den } else { f64::NAN },
        corr_times: (grid[k_start], grid[k_end]),
        cross_time_corr: correlation(&l_start, &l_end),
        skewness: m.skewness(),
        excess_kurtosis: m.excess_kurtosis(),
    })
}

/// Bootstrap over replications of the pooled slope.
fn slope_bootstrap_se(n: usize, seed: u64, pooled: &dyn Fn(&[usize]) -> (Vec<f64>, Vec<f64>)) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x51_09E));
    let reps: Vec<f64> = (0..200)
        .filter_map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let (x, y) = pooled(&idx);
            regression_slope(&x, &y)
        })
        .collect();
    Moments::of(&reps).var.sqrt()
}

/// `Σ̂_1(Y(t, W)) = Σ_1 − tΛ([W]) − Σ_e Λ([e])(t − birth(e))`, the edge count
/// compensated by the integrated hit-measure intensity.
pub fn reduced_edge_count(y: &Tessellation) -> f64 {
    let comp: f64 = y.edges.iter().map(|e| y.lam.hit_measure_segment(&e.segment) * (y.t - e.birth_time)).sum();
    y.edges.len() as f64 - y.t * y.lam.hit_measure_convex(&y.window) - comp
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedVarianceReport {
    pub estimate: McEstimate,
    /// `tΛ([W]) + (t²/2)·c·Area(W)`.
    pub target: f64,
    pub z_mean: f64,
    pub z_variance: f64,
}

/// Mean and variance of `Σ̂_1(Y(t, W))` against `0` and `tΛ([W]) + (t²/2)cA`.
pub fn reduced_count_variance<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    t: f64,
    n_reps: usize,
    rng: &mut R,
) -> Result<ReducedVarianceReport, EstimatorError> {
    need_reps(n_reps, 2)?;
    let base = rng.next_u64();
    let x = replicate(n_reps, base, |seed| Ok(reduced_edge_count(&simulate(lam, w, t, seed)?)))?;
    let estimate = McEstimate::with_bootstrap(&x, N_BOOT, base);
    let target = t * lam.hit_measure_convex(w) + 0.5 * t * t * lam.point_intersection_density() * w.area();
    Ok(ReducedVarianceReport {
        z_mean: estimate.z_mean(0.0),
        z_variance: estimate.z_variance(target),
        estimate,
        target,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub name: String,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n_reps: usize,
    pub s: f64,
    pub t: f64,
    pub z_scores: Vec<ZScore>,
    /// Replications where `Y(0, W) ⊞ Y(t, W)` differs from `Y(t, W)` built
    /// from the same seed.
    pub exact_mismatches: usize,
    pub seed: u64,
}

impl ConsistencyReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().map(|z| z.z.abs()).fold(0.0, f64::max)
    }
}

fn two_sample(name: &str, a: &[f64], b: &[f64], seed: u64, out: &mut Vec<ZScore>) {
    let ea = McEstimate::with_bootstrap(a, N_BOOT, seed);
    let eb = McEstimate::with_bootstrap(b, N_BOOT, seed ^ 0xB);
    let z = |d: f64, s: f64| if s > 0.0 { d / s } else if d == 0.0 { 0.0 } else { f64::INFINITY };
    out.push(ZScore {
        name: format!("{name}/mean"),
        z: z(ea.mean - eb.mean, ea.se_mean.hypot(eb.se_mean)),
    });
    out.push(ZScore {
        name: format!("{name}/variance"),
        z: z(ea.variance - eb.variance, ea.se_variance.hypot(eb.se_variance)),
    });
}

fn length_and_vertices(y: &Tessellation) -> (f64, f64) {
    (y.total_length(), vertices(y).len() as f64)
}

/// Distributional checks in `W` by two-sample z-scores on the mean and
/// variance of `Σ_ℓ` and `N_v`:
/// consistency `Y(s+t, 2W) ∩ W` vs `Y(s+t, W)` (with `2W` centred on `W`),
/// iteration `Y(s, W) ⊞ Y(t, W)` vs `Y(s+t, W)`, and the scaling
/// `2·(Y(t, W) ⊞ Y(t, W))` vs `Y(t, 2W)` on length density. `s = 0` is
/// additionally checked for exact, realization-wise equality.
pub fn consistency_and_iteration_suite<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    w: &ConvexPolygon,
    s: f64,
    t: f64,
    n_reps: usize,
    rng: &mut R,
) -> Result<ConsistencyReport, EstimatorError> {
    need_reps(n_reps, 2)?;
    let base = rng.next_u64();
    let c = w.centroid();
    let v = w.translate(c * -1.0).scale(2.0).translate(c);
    let seeds = |salt: u64| splitmix64(base ^ salt);
    let direct = replicate(n_reps, seeds(1), |seed| Ok(length_and_vertices(&simulate(lam, w, s + t, seed)?)))?;
    let restricted = replicate(n_reps, seeds(2), |seed| {
        Ok(length_and_vertices(&simulate(lam, &v, s + t, seed)?.restrict(w)))
    })?;
    let iterated = replicate(n_reps, seeds(3), |seed| {
        let frame = simulate(lam, w, s, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        Ok(length_and_vertices(&iterate(&frame, stit_filler_bounding(lam, t), &mut rng)?))
    })?;
    let scaled = replicate(n_reps, seeds(4), |seed| {
        let frame = simulate(lam, w, t, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let y = iterate(&frame, stit_filler(lam, t), &mut rng)?;
        // lengths double and areas quadruple under x ↦ 2x
        Ok(2.0 * y.total_length() / (4.0 * w.area()))
    })?;
    let plain = replicate(n_reps, seeds(5), |seed| Ok(simulate(lam, w, t, seed)?.total_length() / w.area()))?;
    let mismatches = replicate(n_reps, seeds(6), |seed| {
        let frame = simulate(lam, w, 0.0, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let y = iterate(&frame, stit_filler(lam, t), &mut rng)?;
        // the filler of the single frame cell draws its seed this way
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let mut cell_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let d = simulate(lam, w, t, cell_rng.next_u64())?;
        let same = y.edges.len() == d.edges.len()
            && y.edges.iter().zip(&d.edges).all(|(a, b)| a.segment == b.segment && a.birth_time == b.birth_time)
            && length_and_vertices(&y) == length_and_vertices(&d);
        Ok(usize::from(!same))
    })?;

    let col = |x: &[(f64, f64)], k: usize| -> Vec<f64> { x.iter().map(|p| if k == 0 { p.0 } else { p.1 }).collect() };
    let mut z_scores = Vec::new();
    for (k, name) in [(0, "length"), (1, "vertices")] {
        two_sample(&format!("consistency/{name}"), &col(&restricted, k), &col(&direct, k), base ^ 0x10 ^ k as u64, &mut z_scores);
        two_sample(&format!("iteration/{name}"), &col(&iterated, k), &col(&direct, k), base ^ 0x20 ^ k as u64, &mut z_scores);
    }
    let mut sc = Vec::new();
    two_sample("scaling/length_density", &scaled, &plain, base ^ 0x30, &mut sc);
    z_scores.push(sc.swap_remove(0));
    Ok(ConsistencyReport {
        n_reps,
        s,
        t,
        z_scores,
        exact_mismatches: mismatches.iter().sum(),
        seed: base,
    })
}

/// Sample covariance of paired replications with a bootstrap standard error.
pub fn covariance_estimate(x: &[f64], y: &[f64], seed: u64) -> (f64, f64) {
    let c = crate::stats::covariance(x, y);
    (c, bootstrap_se_pairs(x, y, N_BOOT, seed, crate::stats::covariance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{cross_k, k_tilde, pcf_vertices};
    use crate::quadrature::integrate;
    use rand_distr::{Distribution, Poisson as PoissonDist};

    fn csr(lambda: f64, w: &ConvexPolygon, rng: &mut ChaCha8Rng) -> VertexProcess {
        let n: f64 = PoissonDist::new(lambda * w.area()).unwrap().sample(rng);
        let points = (0..n as usize).map(|_| Point::new(rng.random(), rng.random())).collect();
        VertexProcess { points, window: w.clone() }
    }

    #[test]
    fn zero_time_moments_vanish() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in MomentStatistic::ALL {
            let e = mc_moments(&iso, &sq, 0.0, s, 10, &mut rng).unwrap();
            assert_eq!((e.mean, e.variance), (0.0, 0.0));
        }
        assert!(mc_moments(&iso, &sq, 1.0, MomentStatistic::EdgeCount, 1, &mut rng).is_err());
    }

    #[test]
    fn moments_are_reproducible_across_thread_counts() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let run = || mc_moments(&iso, &sq, 2.0, MomentStatistic::EdgeLength, 500, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn edge_count_mean_matches_closed_form() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let e = mc_moments(&iso, &sq, 1.0, MomentStatistic::EdgeCount, 20_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(e.z_mean(5.0 / PI).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn pcf_of_csr_is_flat() {
        let sq = ConvexPolygon::unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid: Vec<f64> = (1..=8).map(|k| 0.05 * k as f64).collect();
        let mut acc = vec![0.0; grid.len()];
        let n = 40;
        for _ in 0..n {
            let p = csr(200.0, &sq, &mut rng);
            let g = pcf_estimator(&p, Some(0.03), &grid).unwrap();
            for (a, (_, v)) in acc.iter_mut().zip(g.grid) {
                *a += v / n as f64;
            }
        }
        for a in acc {
            assert!((a - 1.0).abs() < 0.1, "{a}");
        }
    }

    #[test]
    fn k_of_csr_is_pi_r_squared() {
        let sq = ConvexPolygon::unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = [0.05, 0.1, 0.2];
        let mut acc = [0.0; 3];
        for _ in 0..40 {
            let k = k_estimator(&csr(200.0, &sq, &mut rng), &grid).unwrap();
            for (a, (_, v)) in acc.iter_mut().zip(k.grid) {
                *a += v / 40.0;
            }
        }
        for (a, r) in acc.iter().zip(grid) {
            assert!((a / (PI * r * r) - 1.0).abs() < 0.05, "{a} at {r}");
        }
    }

    #[test]
    fn estimator_errors() {
        let sq = ConvexPolygon::unit_square();
        let one = VertexProcess { points: vec![Point::new(0.5, 0.5)], window: sq.clone() };
        assert!(pcf_estimator(&one, None, &[0.1]).is_err());
        let two = VertexProcess { points: vec![Point::new(0.4, 0.5), Point::new(0.6, 0.5)], window: sq };
        assert!(pcf_estimator(&two, Some(0.0), &[0.1]).is_err());
        assert!(pcf_estimator(&two, Some(0.1), &[]).is_err());
        assert!(k_estimator(&two, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn halving_bandwidth_raises_variance() {
        let sq = ConvexPolygon::unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let grid = [0.2];
        let (mut wide, mut narrow) = (Vec::new(), Vec::new());
        for _ in 0..60 {
            let p = csr(100.0, &sq, &mut rng);
            wide.push(pcf_estimator(&p, Some(0.04), &grid).unwrap().grid[0].1);
            narrow.push(pcf_estimator(&p, Some(0.02), &grid).unwrap().grid[0].1);
        }
        assert!(Moments::of(&narrow).var > Moments::of(&wide).var);
    }

    #[test]
    fn smoothing_bias_shrinks_with_bandwidth() {
        // E ĝ(r) = ∫ k_h(r − s) (s/r) g(s) ds
        let t = 2.0;
        let r = 0.2;
        let g = pcf_vertices(t, r).unwrap();
        let bias = |h: f64| {
            let f = |s: f64| epanechnikov(r - s, h) * s / r * pcf_vertices(t, s).unwrap();
            (integrate(&f, r - h, r + h, 1e-12).value - g).abs()
        };
        let h = 0.1;
        assert!(bias(h / 2.0) < bias(h));
    }

    #[test]
    fn disk_piece_matches_clipped_length() {
        let s = Segment::new(Point::new(-2.0, 0.5), Point::new(2.0, 0.5));
        let p = disk_piece(&s, Point::new(0.0, 0.0), 1.0).unwrap();
        assert!((p.length() - s.length_in_disk(Point::new(0.0, 0.0), 1.0)).abs() < 1e-12);
        assert!(disk_piece(&s, Point::new(0.0, 3.0), 1.0).is_none());
    }

    #[test]
    fn tabulated_isotropic_covariance() {
        let cov = IsoCovariance::new(&ConvexPolygon::unit_square());
        for r in [0.0, 0.013, 0.3, 0.77, 1.0] {
            let exact = 1.0 - 4.0 * r / PI + r * r / PI;
            assert!((cov.eval(r) - exact).abs() < 1e-5, "{r}: {} vs {exact}", cov.eval(r));
        }
        assert_eq!(cov.eval(1.5), 0.0);
    }

    #[test]
    fn cross_sums_match_dense_midpoint_rule() {
        let w = ConvexPolygon::rectangle(0.0, 0.0, 1.0, 0.8).unwrap();
        let x = [Point::new(0.3, 0.4), Point::new(0.7, 0.2)];
        let edges = [
            Segment::new(Point::new(0.0, 0.35), Point::new(1.0, 0.5)),
            Segment::new(Point::new(0.6, 0.0), Point::new(0.2, 0.8)),
        ];
        let grid = [0.1, 0.25, 0.5, 0.9];
        let cov = IsoCovariance::new(&w);
        let got = cross_sums(&x, &edges, &cov, &grid, &cross_rule());
        for (k, &r) in grid.iter().enumerate() {
            let mut want = 0.0;
            for &p in &x {
                for e in &edges {
                    let m = 100_000;
                    let ds = e.length() / m as f64;
                    for i in 0..m {
                        let y = e.point_at((i as f64 + 0.5) / m as f64);
                        if y.dist(p) <= r {
                            want += ds * cov.weight(y.dist(p));
                        }
                    }
                }
            }
            assert!((got[k] / want - 1.0).abs() < 1e-4, "{} vs {want} at {r}", got[k]);
        }
    }

    #[test]
    fn pooled_estimators_track_analytics() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let grid = [0.3, 0.5];
        let p = pooled_second_order(&iso, &sq, 2.0, 400, &grid, None, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert!(p.vertex_intensity.z_mean(8.0 / PI).abs() < 3.0);
        assert!(p.length_intensity.z_mean(2.0).abs() < 3.0);
        for (k, &r) in grid.iter().enumerate() {
            let kt = k_tilde(2.0, r).unwrap();
            assert!((p.k_tilde.grid[k].1 / kt - 1.0).abs() < 0.25, "K̃ {} vs {kt}", p.k_tilde.grid[k].1);
            let ck = cross_k(2.0, r).unwrap();
            assert!((p.cross_k.grid[k].1 / ck - 1.0).abs() < 0.25, "K12 {} vs {ck}", p.cross_k.grid[k].1);
        }
    }

    #[test]
    fn chord_counts_are_poisson() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let line = LineP::new(PI / 2.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = chord_poisson_test(&iso, &sq, 2.0, &line, 4000, &mut rng).unwrap();
        assert!((r.expected_mean - 4.0 / PI).abs() < 1e-12);
        assert!(((r.mean - r.expected_mean) / r.se_mean).abs() < 3.0);
        assert!((0.9..1.1).contains(&r.dispersion), "{}", r.dispersion);
        assert!(r.p_value > 0.01);
        let zero = chord_poisson_test(&iso, &sq, 0.0, &line, 10, &mut rng).unwrap();
        assert_eq!(zero.histogram, vec![10]);
        assert_eq!(zero.p_value, 1.0);
        assert!(chord_poisson_test(&iso, &sq, 1.0, &LineP::new(0.0, 5.0), 10, &mut rng).is_err());
    }

    #[test]
    fn gof_rejects_overdispersed_counts() {
        // half zeros, half fours: mean 2
        let (_, _, p) = poisson_gof(&[500, 0, 0, 0, 500], 2.0, 1000);
        assert!(p < 1e-6);
    }

    #[test]
    fn same_cell_probabilities() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = same_cell_test(&iso, &sq, 1.0, &[0.0, 0.3, 0.6, 0.9], 4000, &mut rng).unwrap();
        assert_eq!(r.rows[0].probability, 1.0);
        assert!(r.monotone);
        for row in &r.rows {
            assert!(row.z.abs() < 3.0, "{row:?}");
        }
        assert!(same_cell_test(&iso, &sq, 1.0, &[1.0], 10, &mut rng).is_err());
    }

    #[test]
    fn reduced_count_has_the_stated_variance() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let r = reduced_count_variance(&iso, &sq, 1.0, 20_000, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert!((r.target - 5.0 / PI).abs() < 1e-12);
        assert!(r.z_mean.abs() < 3.0 && r.z_variance.abs() < 3.0, "{r:?}");
    }

    #[test]
    fn clt_paths_shape_and_errors() {
        let sq = ConvexPolygon::unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(clt_paths(&sq, 2.0, &[1.0], 10, &mut rng).is_err());
        assert!(clt_paths(&sq, 8.0, &[1.5], 10, &mut rng).is_err());
        let p = clt_paths(&sq, 8.0, &[0.2, 0.6, 1.0], 300, &mut rng).unwrap();
        assert_eq!(p.samples.len(), 300);
        assert!(p.samples.iter().all(|s| s.len() == 3));
        let d = clt_diagnostics(&p).unwrap();
        assert!(d.var_l1.is_finite() && d.slope.is_some());
        assert!((d.var_l1 / d.var_finite_r - 1.0).abs() < 4.0 * d.var_l1_se / d.var_finite_r, "{d:?}");
        assert!(d.cross_time_corr > 0.0 && d.cross_time_corr < 1.0);
    }

    #[test]
    fn consistency_suite_passes_and_zero_time_iteration_is_exact() {
        let iso = DrivingMeasure::isotropic(1.0);
        let sq = ConvexPolygon::unit_square();
        let r = consistency_and_iteration_suite(&iso, &sq, 0.5, 0.5, 2000, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(r.exact_mismatches, 0);
        assert_eq!(r.z_scores.len(), 9);
        assert!(r.max_abs_z() < 3.5, "{r:?}");
    }
}
