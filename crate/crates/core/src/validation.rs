//! The acceptance suite: simulation checks of every closed form and
//! distributional property, at desk scale.

use std::f64::consts::PI;
use std::fmt::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    cov_hit_count_iso, i_n, k_tilde, pcf_vertices, tail_exp, theorem1_eval, theorem2_cov,
    theorem3_crosscov, var_edge_count_iso, var_edge_length_iso, cross_k, edge_count_kernel, AnalyticsError,
    QuadConfig, WindowShape,
};
use crate::estimators::{
    chord_poisson_test, clt_diagnostics, clt_paths, consistency_and_iteration_suite, covariance_estimate,
    pooled_second_order, reduced_count_variance, replicate, same_cell_test, sample_statistics, CltReport,
    EstimatorError, MomentStatistic,
};
use crate::functionals::{a_phi, edge_length_in, vertices, EdgeFunctional, FunctionalError};
use crate::geometry::{ConvexPolygon, GeometryError, LineP, Point};
use crate::line_measure::DrivingMeasure;
use crate::mnw::{construct_seeded, splitmix64, MnwError};
use crate::quadrature::integrate;
use crate::stats::{mean_and_se, McEstimate};

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error("unknown criterion {0:?}")]
    UnknownCriterion(String),
    #[error("mutation factor must be positive and finite, got {0}")]
    BadMutation(f64),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mnw(#[from] MnwError),
}

/// Identifiers of the criteria in run order.
pub const CRITERIA: [&str; 14] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10a", "10b", "10c", "10d", "11"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub seed: u64,
    /// About a tenth of the replications; the fixed-accuracy tolerances of
    /// criteria 6 and 7 are doubled, z-score bounds stay at 3.
    pub quick: bool,
    /// Multiplies every closed-form target, to check that the suite fails.
    pub mutation: Option<f64>,
    /// Subset of `CRITERIA` to run; all when empty.
    pub only: Vec<String>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { seed: 20_240_601, quick: false, mutation: None, only: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub metrics: Vec<Metric>,
    /// Wall time; left out of the JSON so replays stay identical.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub results: Vec<CriterionResult>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.results.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect()
    }

    /// One line per criterion.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let _ = writeln!(s, "{}", r.line());
        }
        s
    }
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>3}  {:<34} {:>7.1}s  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Runs the selected criteria in order, calling `progress` after each.
pub fn run_validation(
    cfg: &ValidationConfig,
    mut progress: impl FnMut(&CriterionResult),
) -> Result<ValidationReport, ValidationError> {
    if let Some(m) = cfg.mutation {
        if !(m > 0.0 && m.is_finite()) {
            return Err(ValidationError::BadMutation(m));
        }
    }
    for id in &cfg.only {
        if !CRITERIA.contains(&id.as_str()) {
            return Err(ValidationError::UnknownCriterion(id.clone()));
        }
    }
    let mut results = Vec::new();
    for id in CRITERIA {
        if !cfg.only.is_empty() && !cfg.only.iter().any(|o| o == id) {
            continue;
        }
        let r = run_criterion(id, cfg)?;
        progress(&r);
        results.push(r);
    }
    Ok(ValidationReport { config: cfg.clone(), results })
}

/// Runs one criterion by id.
pub fn run_criterion(id: &str, cfg: &ValidationConfig) -> Result<CriterionResult, ValidationError> {
    let ctx = Ctx {
        quick: cfg.quick,
        m: cfg.mutation.unwrap_or(1.0),
        rng: ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ splitmix64(id_salt(id)))),
    };
    let start = Instant::now();
    let mut r = match id {
        "1" => c1_mean_edge_count(ctx),
        "2" => c2_line_integral_identity(ctx),
        "3" => c3_variance_closed_forms(ctx),
        "4" => c4_general_measure_variances(ctx),
        "5" => c5_poisson_sections(ctx),
        "6" => c6_pair_correlation(ctx),
        "7" => c7_cross_k(ctx),
        "8" => c8_window_kernels(ctx),
        "9" => c9_analytic_consistency(ctx),
        "10a" => c10a_reduced_variance(ctx),
        "10b" => c10b_slope(ctx),
        "10c" => c10c_variance_trend(ctx),
        "10d" => c10d_skewness(ctx),
        "11" => c11_structural(ctx),
        other => return Err(ValidationError::UnknownCriterion(other.to_string())),
    }?;
    r.seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

fn id_salt(id: &str) -> u64 {
    id.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3))
}

struct Ctx {
    quick: bool,
    /// Mutation factor applied to closed-form targets.
    m: f64,
    rng: ChaCha8Rng,
}

impl Ctx {
    fn n(&self, full: usize, quick: usize) -> usize {
        if self.quick { quick } else { full }
    }
}

type Out = Result<CriterionResult, ValidationError>;

fn result(id: &str, name: &str, pass: bool, detail: String, metrics: &[(&str, f64)]) -> Out {
    Ok(CriterionResult {
        id: id.to_string(),
        name: name.to_string(),
        pass,
        detail,
        metrics: metrics.iter().map(|&(n, v)| Metric { name: n.to_string(), value: v }).collect(),
        seconds: 0.0,
    })
}

fn iso() -> DrivingMeasure {
    DrivingMeasure::isotropic(1.0)
}

fn z(d: f64, se: f64) -> f64 {
    if se > 0.0 {
        d / se
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

const Z_MAX: f64 = 3.0;

fn c1_mean_edge_count(mut ctx: Ctx) -> Out {
    let n = ctx.n(20_000, 2_000);
    let w = ConvexPolygon::unit_square();
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    let mut pass = true;
    for (t, name) in [(1.0, "z_t1"), (2.0, "z_t2")] {
        let (_, cols) = sample_statistics(&iso(), &w, t, &[MomentStatistic::EdgeCount], n, &mut ctx.rng)?;
        let (mean, se) = mean_and_se(&cols[0]);
        let target = ctx.m * (4.0 * t + t * t) / PI;
        let zz = z(mean - target, se);
        pass &= zz.abs() < Z_MAX;
        parts.push(format!("t={t}: {mean:.4}±{se:.4} vs {target:.4} (z={zz:+.2})"));
        metrics.push((name, zz));
    }
    result("1", "mean edge count", pass, parts.join("; "), &metrics)
}

fn c2_line_integral_identity(mut ctx: Ctx) -> Out {
    let n_real = ctx.n(100, 20);
    let n_lines = 4_000;
    let lam = iso();
    let w = ConvexPolygon::unit_square();
    let base = rand::RngCore::next_u64(&mut ctx.rng);
    let m = ctx.m;
    let rows = replicate(n_real, base, |seed| {
        let y = construct_seeded(&lam, &w, 3.0, seed, Default::default())?;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let est = a_phi(&y, &lam, &EdgeFunctional::One, n_lines, &mut rng, seed)?;
        let hits: f64 = y.edges.iter().map(|e| lam.hit_measure_segment(&e.segment)).sum();
        let target = m * (lam.hit_measure_convex(&w) + hits);
        let n_v = vertices(&y).len();
        let structural =
            usize::from(y.cells.len() != y.edges.len() + 1) + usize::from(n_v + y.boundary_endpoints() != 2 * y.edges.len());
        // realizations without edges give A_1 exactly, up to rounding
        let se = est.se_mean.max(1e-12 * target);
        Ok((z(est.mean - target, se), structural))
    })
    .map_err(ValidationError::from)?;
    let zs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let violations: usize = rows.iter().map(|r| r.1).sum();
    let agg = zs.iter().sum::<f64>() / (zs.len() as f64).sqrt();
    let max = zs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let over = zs.iter().filter(|v| v.abs() >= Z_MAX).count();
    // family-wise 1% bound for the largest of n_real |z|
    let bonferroni = normal_quantile(1.0 - 0.005 / n_real as f64);
    let pass = agg.abs() < Z_MAX && max < bonferroni && violations == 0;
    result(
        "2",
        "line-integral identity, structure",
        pass,
        format!(
            "{n_real} realizations: pooled z={agg:+.2}, max|z|={max:.2} (bound {bonferroni:.2}), {over} with |z|≥3; structural violations {violations}"
        ),
        &[("pooled_z", agg), ("max_abs_z", max), ("violations", violations as f64)],
    )
}

/// Inverse standard normal CDF.
fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

fn c3_variance_closed_forms(mut ctx: Ctx) -> Out {
    let n = ctx.n(100_000, 10_000);
    let t = 1.0;
    let w = ConvexPolygon::regular(256, 1.0, Point::new(0.0, 0.0))?;
    let disk = WindowShape::Disk { radius: 1.0 };
    let q = QuadConfig::default();
    let (base, cols) =
        sample_statistics(&iso(), &w, t, &[MomentStatistic::EdgeCount, MomentStatistic::EdgeLength], n, &mut ctx.rng)?;
    let count = McEstimate::with_bootstrap(&cols[0], 1000, base);
    let length = McEstimate::with_bootstrap(&cols[1], 1000, base ^ 1);
    let tc = ctx.m * var_edge_count_iso(t, &disk, q)?.variance;
    let tl = ctx.m * var_edge_length_iso(t, &disk, q)?.variance;
    let (zc, zl) = (count.z_variance(tc), length.z_variance(tl));
    result(
        "3",
        "variance closed forms (disk)",
        zc.abs() < Z_MAX && zl.abs() < Z_MAX,
        format!(
            "Var Σ1 {:.4}±{:.4} vs {tc:.4} (z={zc:+.2}); Var Σℓ {:.4}±{:.4} vs {tl:.4} (z={zl:+.2})",
            count.variance, count.se_variance, length.variance, length.se_variance
        ),
        &[("z_count", zc), ("z_length", zl)],
    )
}

fn c4_general_measure_variances(mut ctx: Ctx) -> Out {
    let n_kernel = ctx.n(1_000_000, 100_000);
    let n_sim = ctx.n(50_000, 5_000);
    let t = 2.0;
    let w = ConvexPolygon::unit_square();
    let shape = WindowShape::Polygon(w.clone());
    let q = QuadConfig::default();
    let m = ctx.m;

    let e = theorem1_eval(&iso(), &w, t, n_kernel, &mut ctx.rng)?;
    let closed = [
        m * (2.0 / PI).powi(2) * var_edge_length_iso(t, &shape, q)?.variance,
        m * cov_hit_count_iso(t, &shape, q)?,
        m * var_edge_count_iso(t, &shape, q)?.variance,
    ];
    let kernel = [e.var_sigma_lambda, e.cov_lambda_count, e.var_count];
    let z_iso: Vec<f64> = kernel.iter().zip(&closed).map(|(k, c)| (k.value - c) / k.se).collect();

    let lam = DrivingMeasure::orthogonal_pair(1.0);
    let e = theorem1_eval(&lam, &w, t, n_kernel, &mut ctx.rng)?;
    let (base, cols) =
        sample_statistics(&lam, &w, t, &[MomentStatistic::HitMeasure, MomentStatistic::EdgeCount], n_sim, &mut ctx.rng)?;
    let sh = McEstimate::with_bootstrap(&cols[0], 1000, base);
    let sc = McEstimate::with_bootstrap(&cols[1], 1000, base ^ 1);
    let cov = covariance_estimate(&cols[0], &cols[1], base ^ 2);
    let sim = [(sh.variance, sh.se_variance), cov, (sc.variance, sc.se_variance)];
    let kernel = [e.var_sigma_lambda, e.cov_lambda_count, e.var_count];
    let z_atoms: Vec<f64> =
        kernel.iter().zip(&sim).map(|(k, s)| (m * k.value - s.0) / (m * k.se).hypot(s.1)).collect();
    let all = z_iso.iter().chain(&z_atoms);
    let max = all.clone().map(|v| v.abs()).fold(0.0, f64::max);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:+.2}")).collect::<Vec<_>>().join(",");
    result(
        "4",
        "general-measure second moments",
        max < Z_MAX,
        format!(
            "z (VarΣΛ,Cov,VarΣ1): isotropic vs closed form [{}]; orthogonal atoms vs simulation [{}]",
            fmt(&z_iso),
            fmt(&z_atoms)
        ),
        &[("max_abs_z", max)],
    )
}

fn c5_poisson_sections(mut ctx: Ctx) -> Out {
    let n = ctx.n(10_000, 2_000);
    let lam = iso();
    let rect = ConvexPolygon::rectangle(0.0, 0.0, PI / 2.0, 1.0)?;
    let line = LineP::new(PI / 2.0, 0.5);
    let chord = chord_poisson_test(&lam, &rect, 2.0, &line, n, &mut ctx.rng)?;
    let target = ctx.m * chord.expected_mean;
    let zc = z(chord.mean - target, chord.se_mean);
    let chord_ok = zc.abs() < Z_MAX && (0.9..=1.1).contains(&chord.dispersion) && chord.p_value > 0.01;

    let sq = ConvexPolygon::centered_square(Point::new(0.0, 0.0), 2.0)?;
    let sc = same_cell_test(&lam, &sq, 1.0, &[PI / 8.0, PI / 4.0, PI / 2.0], n, &mut ctx.rng)?;
    let zs: Vec<f64> = sc
        .rows
        .iter()
        .map(|r| {
            let tg = ctx.m * r.target;
            z(r.probability - tg, (tg * (1.0 - tg) / r.n_used as f64).sqrt())
        })
        .collect();
    let cell_ok = zs.iter().all(|v| v.abs() < Z_MAX);
    let probs: Vec<String> = sc.rows.iter().map(|r| format!("{:.4}/{:.4}", r.probability, ctx.m * r.target)).collect();
    result(
        "5",
        "Poisson line sections",
        chord_ok && cell_ok,
        format!(
            "chord mean {:.4} vs {target:.4} (z={zc:+.2}), dispersion {:.3}, GOF p={:.3}; same-cell p/target {} (max|z|={:.2})",
            chord.mean,
            chord.dispersion,
            chord.p_value,
            probs.join(" "),
            zs.iter().map(|v| v.abs()).fold(0.0, f64::max)
        ),
        &[("chord_z", zc), ("dispersion", chord.dispersion), ("gof_p", chord.p_value)],
    )
}

fn r_grid() -> Vec<f64> {
    (0..=16).map(|k| 0.2 + 0.05 * k as f64).collect()
}

fn c6_pair_correlation(mut ctx: Ctx) -> Out {
    let n = ctx.n(500, 100);
    let tol = if ctx.quick { 0.1 } else { 0.05 };
    let t = 2.0;
    let grid = r_grid();
    let p = pooled_second_order(&iso(), &ConvexPolygon::unit_square(), t, n, &grid, None, &mut ctx.rng)?;
    let mut max_err: f64 = 0.0;
    let mut at = 0.0;
    let mut se_at = 0.0;
    for (k, &(r, g)) in p.pcf.grid.iter().enumerate() {
        let d = (g - ctx.m * pcf_vertices(t, r)?).abs();
        if d > max_err {
            (max_err, at, se_at) = (d, r, p.pcf_se[k]);
        }
    }
    let lv = ctx.m * 2.0 * t * t / PI;
    let zv = p.vertex_intensity.z_mean(lv);
    result(
        "6",
        "pair correlation",
        max_err < tol && zv.abs() < Z_MAX,
        format!(
            "max|ĝ−g|={max_err:.3} at r={at:.2} (jackknife SE there {se_at:.3}, bound {tol}); vertex intensity {:.4}±{:.4} vs {lv:.4} (z={zv:+.2})",
            p.vertex_intensity.mean, p.vertex_intensity.se_mean
        ),
        &[("max_abs_err", max_err), ("intensity_z", zv)],
    )
}

fn c7_cross_k(mut ctx: Ctx) -> Out {
    let n = ctx.n(500, 100);
    let tol = if ctx.quick { 0.10 } else { 0.05 };
    let t = 2.0;
    let grid = r_grid();
    let p = pooled_second_order(&iso(), &ConvexPolygon::unit_square(), t, n, &grid, None, &mut ctx.rng)?;
    let mut max_rel: f64 = 0.0;
    let mut at = 0.0;
    for &(r, k) in &p.cross_k.grid {
        let e = ((k - ctx.m * cross_k(t, r)?) / (ctx.m * cross_k(t, r)?)).abs();
        if e > max_rel {
            (max_rel, at) = (e, r);
        }
    }
    result(
        "7",
        "cross K-function",
        max_rel < tol,
        format!("max relative error {:.2}% at r={at:.2} (bound {}%)", 100.0 * max_rel, 100.0 * tol),
        &[("max_rel_err", max_rel)],
    )
}

fn c8_window_kernels(mut ctx: Ctx) -> Out {
    let n_sim = ctx.n(100_000, 10_000);
    let n_kernel = ctx.n(1_000_000, 100_000);
    let t = 1.0;
    let lam = iso();
    let a = ConvexPolygon::rectangle(0.0, 0.0, 0.3, 0.3)?;
    let kv = theorem2_cov(&a, &a, &lam, t, n_kernel, &mut ctx.rng)?;
    let kc = theorem3_crosscov(&a, &a, &lam, t, n_kernel, &mut ctx.rng)?;
    let base = rand::RngCore::next_u64(&mut ctx.rng);
    let rows = replicate(n_sim, base, |seed| {
        let y = construct_seeded(&lam, &a, t, seed, Default::default())?;
        Ok((vertices(&y).len() as f64, edge_length_in(&y, &a)?))
    })
    .map_err(ValidationError::from)?;
    let nv: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let len: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let sv = McEstimate::with_bootstrap(&nv, 1000, base);
    let sc = covariance_estimate(&nv, &len, base ^ 1);
    let zv = z(ctx.m * kv.value - sv.variance, (ctx.m * kv.se).hypot(sv.se_variance));
    let zc = z(ctx.m * kc.value - sc.0, (ctx.m * kc.se).hypot(sc.1));
    result(
        "8",
        "window covariance kernels",
        zv.abs() < Z_MAX && zc.abs() < Z_MAX,
        format!(
            "Var N_v(A): kernel {:.3e}±{:.1e} vs sim {:.3e}±{:.1e} (z={zv:+.2}); Cov(N_v, ℓ): kernel {:.3e}±{:.1e} vs sim {:.3e}±{:.1e} (z={zc:+.2})",
            kv.value, kv.se, sv.variance, sv.se_variance, kc.value, kc.se, sc.0, sc.1
        ),
        &[("z_var", zv), ("z_cov", zc)],
    )
}

fn c9_analytic_consistency(ctx: Ctx) -> Out {
    let m = ctx.m;
    // K̃' = 2πr g by central differences
    let mut k_err: f64 = 0.0;
    for t in [0.5, 1.0, 2.0, 5.0] {
        for r in [0.05, 0.2, 0.5, 1.0, 2.0] {
            let h = 1e-4 * r;
            let dk = (k_tilde(t, r + h)? - k_tilde(t, r - h)?) / (2.0 * h);
            let g = m * pcf_vertices(t, r)?;
            k_err = k_err.max((dk - 2.0 * PI * r * g).abs() / (2.0 * PI * r * g));
        }
    }
    // I^n against direct quadrature of its defining integral
    let mut i_err: f64 = 0.0;
    for n in 1..=3u32 {
        for lambda in [0.0, 0.01, 0.5, 3.9, 4.1, 10.0, 50.0] {
            for t in [0.1, 1.0, 2.0] {
                let fact = [1.0, 1.0, 2.0][n as usize - 1];
                let f = |s: f64| (t - s).powi(n as i32 - 1) * s * s * (-lambda * s).exp() / fact;
                let q = integrate(&f, 0.0, t, 1e-14).value;
                let v = m * i_n(n, lambda, t)?;
                i_err = i_err.max((v - q).abs() / q.abs());
            }
        }
    }
    // continuity across the series/closed-form switches
    let mut jump: f64 = 0.0;
    let mut flips = 0usize;
    let mut probe = |f: &dyn Fn(f64) -> f64, x0: f64| {
        let (a, b) = (f(x0 * (1.0 - 1e-9)), f(x0 * (1.0 + 1e-9)));
        jump = jump.max((a - b).abs() / a.abs().max(b.abs()));
        flips += usize::from(a.signum() != b.signum());
    };
    for n in 0..=4u32 {
        probe(&|u| tail_exp(n, u), -1.0);
        probe(&|u| tail_exp(n, u), 1.0);
    }
    for n in 1..=3u32 {
        probe(&|l| i_n(n, l, 1.0).unwrap_or(f64::NAN), 4.0);
    }
    // pcf and edge-count kernel switch at 2tr/π = 1 and |−2tr/π| = 1
    let r1 = PI / 2.0;
    probe(&|r| pcf_vertices(1.0, r).unwrap_or(f64::NAN), r1);
    probe(&|r| edge_count_kernel(1.0, r), r1);
    probe(&|r| cov_integrand_probe(r), r1);
    let pass = k_err < 1e-5 && i_err < 1e-8 && jump <= 1e-6 && flips == 0;
    result(
        "9",
        "internal analytic consistency",
        pass,
        format!(
            "dK̃/dr vs 2πrg rel {k_err:.1e} (<1e-5); I^n vs quadrature rel {i_err:.1e} (<1e-8); guard jumps {jump:.1e} (≤1e-6), sign flips {flips}"
        ),
        &[("k_rel_err", k_err), ("i_rel_err", i_err), ("guard_jump", jump), ("sign_flips", flips as f64)],
    )
}

/// `T₂(−2r/π)/r²`, the covariance integrand core at `t = 1`.
fn cov_integrand_probe(r: f64) -> f64 {
    tail_exp(2, -2.0 * r / PI) / (r * r)
}

fn c10a_reduced_variance(mut ctx: Ctx) -> Out {
    let n = ctx.n(10_000, 2_000);
    let rep = reduced_count_variance(&iso(), &ConvexPolygon::unit_square(), 1.0, n, &mut ctx.rng)?;
    let target = ctx.m * rep.target;
    let zv = rep.estimate.z_variance(target);
    result(
        "10a",
        "CLT: compensated count variance",
        zv.abs() < Z_MAX,
        format!(
            "Var Σ̂1 {:.4}±{:.4} vs {target:.4} (z={zv:+.2}); mean {:+.4} (z={:+.2})",
            rep.estimate.variance, rep.estimate.se_variance, rep.estimate.mean, rep.z_mean
        ),
        &[("z_variance", zv), ("z_mean", rep.z_mean)],
    )
}

const CLT_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

fn clt(ctx: &mut Ctx, big_r: f64, n: usize) -> Result<CltReport, ValidationError> {
    let p = clt_paths(&ConvexPolygon::unit_square(), big_r, &CLT_GRID, n, &mut ctx.rng)?;
    Ok(clt_diagnostics(&p)?)
}

fn c10b_slope(mut ctx: Ctx) -> Out {
    let n = ctx.n(500, 100);
    let rep = clt(&mut ctx, 32.0, n)?;
    let s = rep.slope.unwrap_or(f64::NAN) / ctx.m;
    result(
        "10b",
        "CLT: slope of C_t on t·L_t",
        (0.8..=1.2).contains(&s),
        format!(
            "R=32: slope {s:.3}±{:.3} (bound [0.8,1.2]; exact finite-R value {:.3})",
            rep.slope_se, rep.slope_finite_r
        ),
        &[("slope", s), ("slope_se", rep.slope_se), ("slope_finite_r", rep.slope_finite_r)],
    )
}

fn c10c_variance_trend(mut ctx: Ctx) -> Out {
    let n = ctx.n(2_000, 200);
    let mut ratios = Vec::new();
    let mut parts = Vec::new();
    for big_r in [8.0, 16.0, 32.0, 64.0] {
        let rep = clt(&mut ctx, big_r, n)?;
        let target = ctx.m * rep.var_target;
        let ratio = rep.var_l1 / target;
        parts.push(format!(
            "R={big_r}: {ratio:.3}±{:.3} (finite-R {:.3})",
            rep.var_l1_se / target,
            rep.var_finite_r / target
        ));
        ratios.push(ratio);
    }
    let monotone = ratios.windows(2).all(|w| w[1] > w[0]);
    result(
        "10c",
        "CLT: Var L_1 ratio trend",
        monotone,
        format!("Var L_1/(4A/π) {}", parts.join(", ")),
        &[("ratio_8", ratios[0]), ("ratio_16", ratios[1]), ("ratio_32", ratios[2]), ("ratio_64", ratios[3])],
    )
}

fn c10d_skewness(mut ctx: Ctx) -> Out {
    let n = ctx.n(2_000, 200);
    let rep = clt(&mut ctx, 64.0, n)?;
    result(
        "10d",
        "CLT: skewness of L_1",
        rep.skewness.abs() < 0.3,
        format!(
            "R=64: skewness {:+.3} (bound 0.3), excess kurtosis {:+.3}, corr(L_0.2, L_1) {:.3}",
            rep.skewness, rep.excess_kurtosis, rep.cross_time_corr
        ),
        &[("skewness", rep.skewness), ("excess_kurtosis", rep.excess_kurtosis), ("cross_time_corr", rep.cross_time_corr)],
    )
}

fn c11_structural(mut ctx: Ctx) -> Out {
    let n = ctx.n(10_000, 1_000);
    let rep =
        consistency_and_iteration_suite(&iso(), &ConvexPolygon::unit_square(), 0.5, 0.5, n, &mut ctx.rng)?;
    let max = rep.max_abs_z();
    let zs: Vec<String> = rep.z_scores.iter().map(|z| format!("{}={:+.2}", z.name, z.z)).collect();
    result(
        "11",
        "consistency and iteration",
        max < Z_MAX && rep.exact_mismatches == 0,
        format!("max|z|={max:.2}; s=0 mismatches {}; {}", rep.exact_mismatches, zs.join(" ")),
        &[("max_abs_z", max), ("mismatches", rep.exact_mismatches as f64)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(ids: &[&str], mutation: Option<f64>) -> ValidationConfig {
        ValidationConfig { seed: 7, quick: true, mutation, only: ids.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn analytic_criterion_passes_and_detects_mutation() {
        let ok = run_validation(&cfg(&["9"], None), |_| {}).unwrap();
        assert!(ok.all_pass(), "{}", ok.table());
        let bad = run_validation(&cfg(&["9"], Some(1.01)), |_| {}).unwrap();
        assert_eq!(bad.failures(), vec!["9"]);
    }

    #[test]
    fn quick_mean_count_criterion_detects_mutation() {
        assert!(run_validation(&cfg(&["1"], None), |_| {}).unwrap().all_pass());
        assert!(!run_validation(&cfg(&["1"], Some(1.1)), |_| {}).unwrap().all_pass());
    }

    #[test]
    fn rejects_unknown_ids_and_bad_mutation() {
        assert!(matches!(run_validation(&cfg(&["12"], None), |_| {}), Err(ValidationError::UnknownCriterion(_))));
        assert!(matches!(run_validation(&cfg(&[], Some(0.0)), |_| {}), Err(ValidationError::BadMutation(_))));
    }

    #[test]
    fn report_json_is_replayable() {
        let a = run_validation(&cfg(&["9"], None), |_| {}).unwrap();
        let b = run_validation(&cfg(&["9"], None), |_| {}).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
