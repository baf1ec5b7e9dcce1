//! Subcommand drivers.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stit_core::analytics::{
    asymptotic_variance, comparison_curves, cross_k, k_tilde, pcf_vertices, var_edge_count_iso, var_edge_length_iso,
    mean_edge_count, Model, QuadConfig, Statistic,
};
use stit_core::estimators::{clt_diagnostics, clt_paths, mc_moments, pooled_second_order, CltReport, MomentStatistic};
use stit_core::functionals::{direction_histogram, vertices};
use stit_core::io::TessellationExport;
use stit_core::mnw::construct_seeded;
use stit_core::render::{render_svg, SvgOptions};
use stit_core::stats::McEstimate;
use stit_core::validation::{run_validation, ValidationConfig, ValidationReport};

use crate::config::ExperimentConfig;
use crate::output::{num, opt, Output};
use crate::CliError;

/// Command generator derived from the seed.
fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

#[derive(Serialize)]
struct SimulateData {
    summary: SimulateSummary,
    tessellation: TessellationExport,
}

#[derive(Serialize)]
struct SimulateSummary {
    edges: usize,
    vertices: usize,
    cells: usize,
    total_length: f64,
}

pub fn simulate(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let w = cfg.window.polygon()?;
    let y = construct_seeded(&cfg.measure, &w, cfg.t, cfg.seed(), Default::default()).map_err(run_err)?;
    let data = SimulateData {
        summary: SimulateSummary {
            edges: y.edges.len(),
            vertices: vertices(&y).len(),
            cells: y.cells.len(),
            total_length: y.total_length(),
        },
        tessellation: TessellationExport::from(&y),
    };
    out.json("tessellation.json", &data)?;
    if cfg.svg {
        let opts = SvgOptions { vertex_markers: cfg.vertex_markers, ..Default::default() };
        out.svg("tessellation.svg", &render_svg(&y, &opts))?;
    }
    let bins = cfg.histogram_bins;
    let observed = direction_histogram(&y, bins);
    let expected = cfg.measure.direction_bins(bins);
    let width = PI / bins as f64;
    let rows = (0..bins)
        .map(|k| {
            let centre = k as f64 * width;
            vec![num(centre - 0.5 * width), num(centre + 0.5 * width), num(observed[k]), num(expected[k])]
        })
        .collect();
    out.csv("directions.csv", &["angle_lo", "angle_hi", "length_fraction", "expected"], rows)
}

#[derive(Serialize)]
struct MomentRow {
    statistic: MomentStatistic,
    estimate: McEstimate,
    target_mean: f64,
    target_variance: Option<f64>,
}

pub fn moments(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let w = cfg.window.polygon()?;
    let lam = &cfg.measure;
    let (t, area) = (cfg.t, w.area());
    let c = lam.point_intersection_density();
    let mut g = rng(cfg.seed());
    let quad = QuadConfig::default();
    let mut rows = Vec::new();
    for &s in &cfg.statistics {
        let estimate = mc_moments(lam, &w, t, s, cfg.reps, &mut g).map_err(run_err)?;
        let target_mean = match s {
            MomentStatistic::EdgeCount => mean_edge_count(lam, &w, t),
            MomentStatistic::EdgeLength => t * lam.tau() * area,
            MomentStatistic::HitMeasure => t * c * area,
            MomentStatistic::VertexCount => t * t * c * area,
        };
        let target_variance = match (cfg.isotropic_time(), s) {
            (Some(u), _) if u == 0.0 => Some(0.0),
            (Some(u), MomentStatistic::EdgeCount) => Some(var_edge_count_iso(u, &cfg.window.shape()?, quad).map_err(run_err)?.variance),
            (Some(u), MomentStatistic::EdgeLength) => {
                Some(var_edge_length_iso(u, &cfg.window.shape()?, quad).map_err(run_err)?.variance)
            }
            (Some(u), MomentStatistic::HitMeasure) => Some(
                (2.0 * lam.tau() / PI).powi(2) * var_edge_length_iso(u, &cfg.window.shape()?, quad).map_err(run_err)?.variance,
            ),
            _ => None,
        };
        rows.push(MomentRow { statistic: s, estimate, target_mean, target_variance });
    }
    let csv = rows
        .iter()
        .map(|r| {
            let e = &r.estimate;
            vec![
                r.statistic.name().to_string(),
                e.n.to_string(),
                num(e.mean),
                num(e.se_mean),
                num(r.target_mean),
                num(e.z_mean(r.target_mean)),
                num(e.variance),
                num(e.se_variance),
                opt(r.target_variance),
                opt(r.target_variance.map(|v| e.z_variance(v))),
            ]
        })
        .collect();
    out.json("moments.json", &rows)?;
    out.csv(
        "moments.csv",
        &["statistic", "n", "mean", "se_mean", "target_mean", "z_mean", "variance", "se_variance", "target_variance", "z_variance"],
        csv,
    )
}

#[derive(Serialize)]
struct PcfSummary {
    n_reps: usize,
    bandwidth: f64,
    vertex_intensity: McEstimate,
    vertex_intensity_target: f64,
    max_abs_error_g: Option<f64>,
}

fn analytic(t: Option<f64>, f: fn(f64, f64) -> Result<f64, stit_core::analytics::AnalyticsError>, r: f64) -> Option<f64> {
    t.filter(|&u| u > 0.0).and_then(|u| f(u, r).ok())
}

pub fn pcf(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let w = cfg.window.polygon()?;
    let p = pooled_second_order(&cfg.measure, &w, cfg.t, cfg.reps, &cfg.r_grid, cfg.bandwidth, &mut rng(cfg.seed()))
        .map_err(run_err)?;
    let u = cfg.isotropic_time();
    let mut max_err: Option<f64> = None;
    let rows = cfg
        .r_grid
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let g = analytic(u, pcf_vertices, r);
            if let Some(g) = g {
                max_err = Some(max_err.unwrap_or(0.0).max((p.pcf.grid[k].1 - g).abs()));
            }
            vec![
                num(r),
                num(p.pcf.grid[k].1),
                num(p.pcf_se[k]),
                opt(g),
                num(p.k_tilde.grid[k].1),
                num(p.k_tilde_se[k]),
                opt(analytic(u, k_tilde, r)),
            ]
        })
        .collect();
    let summary = PcfSummary {
        n_reps: p.n_reps,
        bandwidth: p.bandwidth,
        vertex_intensity_target: cfg.t * cfg.t * cfg.measure.point_intersection_density(),
        vertex_intensity: p.vertex_intensity,
        max_abs_error_g: max_err,
    };
    out.json("pcf.json", &summary)?;
    out.csv("pcf.csv", &["r", "g_hat", "g_se", "g", "k_tilde_hat", "k_tilde_se", "k_tilde"], rows)
}

#[derive(Serialize)]
struct CrossKSummary {
    n_reps: usize,
    length_intensity: McEstimate,
    max_rel_error: Option<f64>,
}

pub fn crossk(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let w = cfg.window.polygon()?;
    let p = pooled_second_order(&cfg.measure, &w, cfg.t, cfg.reps, &cfg.r_grid, cfg.bandwidth, &mut rng(cfg.seed()))
        .map_err(run_err)?;
    let u = cfg.isotropic_time();
    let mut max_rel: Option<f64> = None;
    let rows = cfg
        .r_grid
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let est = p.cross_k.grid[k].1;
            let target = analytic(u, cross_k, r);
            let rel = target.map(|v| (est - v) / v);
            if let Some(e) = rel {
                max_rel = Some(max_rel.unwrap_or(0.0).max(e.abs()));
            }
            vec![num(r), num(est), num(p.cross_k_se[k]), opt(target), opt(rel)]
        })
        .collect();
    out.json("crossk.json", &CrossKSummary { n_reps: p.n_reps, length_intensity: p.length_intensity, max_rel_error: max_rel })?;
    out.csv("crossk.csv", &["r", "k12_hat", "k12_se", "k12", "rel_error"], rows)
}

#[derive(Serialize)]
struct CltData {
    reports: Vec<CltReport>,
    /// `Var L_1 / (4 Area/π)` increases with `R`.
    monotone: bool,
}

pub fn clt(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    if !(cfg.measure.is_uniform() && cfg.measure.tau() == 1.0) {
        return Err(CliError::Config("clt uses the isotropic measure with tau = 1".into()));
    }
    let w = cfg.window.polygon()?;
    let mut g = rng(cfg.seed());
    let mut reports = Vec::new();
    for &big_r in &cfg.scales {
        let paths = clt_paths(&w, big_r, &cfg.t_grid, cfg.reps, &mut g).map_err(run_err)?;
        reports.push(clt_diagnostics(&paths).map_err(run_err)?);
    }
    let monotone = reports.windows(2).all(|p| p[1].var_ratio > p[0].var_ratio);
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                num(r.r),
                r.n_reps.to_string(),
                num(r.var_ratio),
                num(r.var_l1_se / r.var_target),
                num(r.var_finite_r / r.var_target),
                opt(r.slope),
                num(r.slope_se),
                num(r.slope_finite_r),
                num(r.cross_time_corr),
                num(r.skewness),
                num(r.excess_kurtosis),
            ]
        })
        .collect();
    out.json("clt.json", &CltData { reports, monotone })?;
    out.csv(
        "clt.csv",
        &[
            "R",
            "n_reps",
            "var_ratio",
            "var_ratio_se",
            "var_ratio_finite_r",
            "slope",
            "slope_se",
            "slope_finite_r",
            "cross_time_corr",
            "skewness",
            "excess_kurtosis",
        ],
        rows,
    )
}

#[derive(Serialize)]
struct CompareData {
    t: f64,
    curves: Vec<stit_core::analytics::SecondOrderCurve>,
    /// `(R, STIT, PLT, PVT)` leading asymptotics of `Var N_v(R·W)`.
    variance: Vec<[f64; 4]>,
}

pub fn compare(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let t = cfg
        .isotropic_time()
        .filter(|&u| u > 0.0)
        .ok_or_else(|| CliError::Config("compare needs an isotropic measure and t > 0".into()))?;
    let mut curves = Vec::new();
    for (stat, file) in [(Statistic::G, "g"), (Statistic::Rho, "rho"), (Statistic::G12, "g12")] {
        let stit = comparison_curves(Model::Stit, stat, t, &cfg.r_grid).map_err(run_err)?;
        let plt = comparison_curves(Model::Plt, stat, t, &cfg.r_grid).map_err(run_err)?;
        let rows = stit.grid.iter().zip(&plt.grid).map(|(a, b)| vec![num(a.0), num(a.1), num(b.1)]).collect();
        let (hs, hp) = (format!("{file}_STIT"), format!("{file}_PLT"));
        out.csv(&format!("{file}.csv"), &["r", &hs, &hp], rows)?;
        curves.push(stit);
        curves.push(plt);
    }
    let shape = cfg.window.shape()?;
    let variance = cfg
        .variance_scales
        .iter()
        .map(|&r| {
            Ok([
                r,
                asymptotic_variance(Model::Stit, t, &shape, r).map_err(run_err)?,
                asymptotic_variance(Model::Plt, t, &shape, r).map_err(run_err)?,
                asymptotic_variance(Model::Pvt, t, &shape, r).map_err(run_err)?,
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = variance.iter().map(|v| v.iter().map(|&x| num(x)).collect()).collect();
    out.csv("variance.csv", &["R", "var_STIT", "var_PLT", "var_PVT"], rows)?;
    out.json("compare.json", &CompareData { t, curves, variance })
}

pub fn validate(vcfg: &ValidationConfig, out: &mut Output) -> Result<ValidationReport, CliError> {
    let report = run_validation(vcfg, |r| println!("{}", r.line())).map_err(|e| match e {
        stit_core::validation::ValidationError::UnknownCriterion(_) | stit_core::validation::ValidationError::BadMutation(_) => {
            CliError::Config(e.to_string())
        }
        other => run_err(other),
    })?;
    out.json("validation.json", &report)?;
    Ok(report)
}
