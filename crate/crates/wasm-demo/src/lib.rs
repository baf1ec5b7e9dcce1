//! Browser bindings: draw a realization, tabulate second-order curves and
//! estimate a same-cell probability. The plain functions return
//! `Result<String, String>` so they can be tested natively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stit_core::analytics::{comparison_curves, Model, Statistic};
use stit_core::estimators::same_cell_test;
use stit_core::geometry::{ConvexPolygon, Point};
use stit_core::line_measure::DrivingMeasure;
use stit_core::mnw::construct_seeded;
use stit_core::render::{render_svg, SvgOptions};
use wasm_bindgen::prelude::*;

fn measure(directions: &str) -> Result<DrivingMeasure, String> {
    match directions {
        "isotropic" => Ok(DrivingMeasure::isotropic(1.0)),
        "axes" => Ok(DrivingMeasure::orthogonal_pair(1.0)),
        other => Err(format!("unknown directions {other:?}; use \"isotropic\" or \"axes\"")),
    }
}

/// SVG of `Y(t, [0,1]²)`.
pub fn tessellation_svg(directions: &str, t: f64, seed: u32, width_px: f64) -> Result<String, String> {
    let lam = measure(directions)?;
    let y = construct_seeded(&lam, &ConvexPolygon::unit_square(), t, seed as u64, Default::default())
        .map_err(|e| e.to_string())?;
    let opts = SvgOptions { width_px, ..Default::default() };
    Ok(render_svg(&y, &opts))
}

#[derive(Serialize)]
struct Curves {
    r: Vec<f64>,
    g_stit: Vec<f64>,
    g_plt: Vec<f64>,
    g12_stit: Vec<f64>,
    g12_plt: Vec<f64>,
}

/// JSON columns of `g` and `g12` for STIT and Poisson lines on `(0, r_max]`.
pub fn curves_json(t: f64, r_max: f64, points: usize) -> Result<String, String> {
    if !(r_max > 0.0) || points < 2 {
        return Err("need r_max > 0 and at least 2 points".into());
    }
    let r: Vec<f64> = (1..=points).map(|k| r_max * k as f64 / points as f64).collect();
    let col = |m, s| {
        comparison_curves(m, s, t, &r)
            .map(|c| c.grid.into_iter().map(|p| p.1).collect::<Vec<_>>())
            .map_err(|e| e.to_string())
    };
    let c = Curves {
        g_stit: col(Model::Stit, Statistic::G)?,
        g_plt: col(Model::Plt, Statistic::G)?,
        g12_stit: col(Model::Stit, Statistic::G12)?,
        g12_plt: col(Model::Plt, Statistic::G12)?,
        r,
    };
    serde_json::to_string(&c).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SameCell {
    distance: f64,
    probability: f64,
    se: f64,
    target: f64,
    n_used: usize,
}

/// Monte Carlo probability that two points `distance` apart, centred in
/// `[-1,1]²`, share a cell of the isotropic `Y(t)`.
pub fn same_cell_json(t: f64, distance: f64, reps: usize, seed: u32) -> Result<String, String> {
    let w = ConvexPolygon::centered_square(Point::new(0.0, 0.0), 2.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let rep = same_cell_test(&DrivingMeasure::isotropic(1.0), &w, t, &[distance], reps, &mut rng)
        .map_err(|e| e.to_string())?;
    let row = &rep.rows[0];
    serde_json::to_string(&SameCell {
        distance,
        probability: row.probability,
        se: row.se,
        target: row.target,
        n_used: row.n_used,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = tessellationSvg)]
pub fn tessellation_svg_js(directions: &str, t: f64, seed: u32, width_px: f64) -> Result<String, JsError> {
    tessellation_svg(directions, t, seed, width_px).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = curvesJson)]
pub fn curves_json_js(t: f64, r_max: f64, points: usize) -> Result<String, JsError> {
    curves_json(t, r_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sameCellJson)]
pub fn same_cell_json_js(t: f64, distance: f64, reps: usize, seed: u32) -> Result<String, JsError> {
    same_cell_json(t, distance, reps, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_for_both_measures() {
        for d in ["isotropic", "axes"] {
            let s = tessellation_svg(d, 5.0, 1, 400.0).unwrap();
            assert!(s.starts_with("<svg") && s.contains("<polyline"));
        }
        assert!(tessellation_svg("radial", 1.0, 1, 400.0).is_err());
    }

    #[test]
    fn curves_have_matching_columns() {
        let v: serde_json::Value = serde_json::from_str(&curves_json(1.0, 2.0, 20).unwrap()).unwrap();
        assert_eq!(v["r"].as_array().unwrap().len(), 20);
        let plt = v["g_plt"][19].as_f64().unwrap();
        assert!((plt - (1.0 + 2.0 / std::f64::consts::PI)).abs() < 1e-12);
        assert!(curves_json(1.0, 0.0, 20).is_err());
    }

    #[test]
    fn same_cell_probability_near_target() {
        let v: serde_json::Value = serde_json::from_str(&same_cell_json(1.0, 0.5, 2000, 3).unwrap()).unwrap();
        let (p, t, se) = (v["probability"].as_f64().unwrap(), v["target"].as_f64().unwrap(), v["se"].as_f64().unwrap());
        assert!((p - t).abs() < 4.0 * se, "{p} vs {t}");
        assert!(same_cell_json(1.0, 3.0, 100, 3).is_err());
    }
}
