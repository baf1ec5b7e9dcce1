use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stit_core::estimators::{default_bandwidth, k_estimator, pcf_estimator, pooled_second_order};
use stit_core::functionals::vertices;
use stit_core::geometry::ConvexPolygon;
use stit_core::line_measure::DrivingMeasure;
use stit_core::mnw::construct_seeded;

#[test]
fn pooled_estimates_do_not_depend_on_thread_count() {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let grid = [0.2, 0.4, 0.6];
            pooled_second_order(&DrivingMeasure::isotropic(1.0), &ConvexPolygon::unit_square(), 3.0, 40, &grid, None, &mut rng)
                .unwrap()
        })
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn pcf_matches_the_derivative_of_k() {
    let w = ConvexPolygon::unit_square();
    let y = construct_seeded(&DrivingMeasure::isotropic(1.0), &w, 25.0, 8, Default::default()).unwrap();
    let v = vertices(&y);
    let h = default_bandwidth(v.intensity());
    let grid: Vec<f64> = (0..6).map(|k| 0.1 + 0.04 * k as f64).collect();
    let g = pcf_estimator(&v, None, &grid).unwrap();
    let lo: Vec<f64> = grid.iter().map(|r| r - h).collect();
    let hi: Vec<f64> = grid.iter().map(|r| r + h).collect();
    let (k_lo, k_hi) = (k_estimator(&v, &lo).unwrap(), k_estimator(&v, &hi).unwrap());
    for (i, &r) in grid.iter().enumerate() {
        let dk = (k_hi.grid[i].1 - k_lo.grid[i].1) / (2.0 * h * 2.0 * PI * r);
        let gi = g.grid[i].1;
        assert!((gi - dk).abs() < 0.15 * dk.max(1.0), "r={r}: g={gi} dK/(2πr)={dk}");
    }
}
