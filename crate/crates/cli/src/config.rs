//! Experiment configuration: a JSON file, overridden by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stit_core::analytics::WindowShape;
use stit_core::estimators::MomentStatistic;
use stit_core::geometry::{ConvexPolygon, Point};
use stit_core::line_measure::DrivingMeasure;

use crate::CliError;

/// Observation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSpec {
    /// `[0, side]²`.
    Square { side: f64 },
    /// `[0, width] × [0, height]`.
    Rectangle { width: f64, height: f64 },
    /// Disk about the origin, simulated as a regular polygon.
    Disk {
        radius: f64,
        #[serde(default = "default_disk_sides")]
        sides: usize,
    },
    /// Convex polygon, vertices in either orientation.
    Polygon { vertices: Vec<[f64; 2]> },
}

fn default_disk_sides() -> usize {
    256
}

impl WindowSpec {
    pub fn polygon(&self) -> Result<ConvexPolygon, CliError> {
        let p = match self {
            Self::Square { side } => ConvexPolygon::rectangle(0.0, 0.0, *side, *side),
            Self::Rectangle { width, height } => ConvexPolygon::rectangle(0.0, 0.0, *width, *height),
            Self::Disk { radius, sides } => ConvexPolygon::regular(*sides, *radius, Point::new(0.0, 0.0)),
            Self::Polygon { vertices } => ConvexPolygon::new(vertices.iter().map(|v| Point::new(v[0], v[1])).collect()),
        };
        p.map_err(|e| CliError::Config(format!("window: {e}")))
    }

    /// Shape used by the closed forms; disks keep their exact covariance.
    pub fn shape(&self) -> Result<WindowShape, CliError> {
        Ok(match self {
            Self::Disk { radius, .. } => WindowShape::Disk { radius: *radius },
            _ => WindowShape::Polygon(self.polygon()?),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required, from the file or `--seed`.
    pub seed: Option<u64>,
    pub measure: DrivingMeasure,
    pub window: WindowSpec,
    pub t: f64,
    /// Replications for the Monte Carlo commands.
    pub reps: usize,
    /// Statistics for `moments`.
    pub statistics: Vec<MomentStatistic>,
    /// Distances for `pcf`, `crossk` and `compare`.
    pub r_grid: Vec<f64>,
    /// Kernel bandwidth for `pcf`; `0.15/√λ̂` when absent.
    pub bandwidth: Option<f64>,
    /// `simulate`: also write an SVG drawing.
    pub svg: bool,
    pub vertex_markers: bool,
    /// `simulate`: bins of the edge-direction histogram.
    pub histogram_bins: usize,
    /// `clt`: window scale factors `R`.
    pub scales: Vec<f64>,
    /// `clt`: times in `[0, 1]`.
    pub t_grid: Vec<f64>,
    /// `compare`: scale factors of the asymptotic-variance table.
    pub variance_scales: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            measure: DrivingMeasure::isotropic(1.0),
            window: WindowSpec::Square { side: 1.0 },
            t: 2.0,
            reps: 500,
            statistics: vec![MomentStatistic::EdgeCount, MomentStatistic::EdgeLength],
            r_grid: (0..=16).map(|k| 0.2 + 0.05 * k as f64).collect(),
            bandwidth: None,
            svg: true,
            vertex_markers: false,
            histogram_bins: 12,
            scales: vec![8.0, 16.0, 32.0],
            t_grid: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            variance_scales: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.seed.is_none() {
            return bad("a seed is required (config \"seed\" or --seed)");
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return bad("t must be finite and non-negative");
        }
        if self.reps < 2 {
            return bad("reps must be at least 2");
        }
        if self.r_grid.is_empty() || self.r_grid[0] <= 0.0 || self.r_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("r_grid must be positive and strictly increasing");
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be positive");
        }
        self.window.polygon()?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("checked")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Time of the unit-intensity isotropic process with the same law, for
    /// the isotropic closed forms.
    pub fn isotropic_time(&self) -> Option<f64> {
        self.measure.is_uniform().then(|| self.t * self.measure.tau())
    }
}
