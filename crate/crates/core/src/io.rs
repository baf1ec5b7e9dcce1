//! Plain-data export of tessellations and line-oriented CSV helpers.

use serde::{Deserialize, Serialize};

use crate::analytics::SecondOrderCurve;
use crate::geometry::{ConvexPolygon, Point};
use crate::mnw::Tessellation;

/// `{window, t, edges: [{id, a, b, birth, internal: [[x, y, childId], …]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TessellationExport {
    pub window: ConvexPolygon,
    pub t: f64,
    pub edges: Vec<EdgeExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeExport {
    pub id: usize,
    pub a: Point,
    pub b: Point,
    pub birth: f64,
    /// Internal vertices in order along the edge, with the id of the edge
    /// ending there.
    pub internal: Vec<(f64, f64, usize)>,
}

impl From<&Tessellation> for TessellationExport {
    fn from(y: &Tessellation) -> Self {
        Self {
            window: y.window.clone(),
            t: y.t,
            edges: y
                .edges
                .iter()
                .map(|e| EdgeExport {
                    id: e.id,
                    a: e.segment.a,
                    b: e.segment.b,
                    birth: e.birth_time,
                    internal: e.internal_vertices.iter().map(|v| (v.point.x, v.point.y, v.child)).collect(),
                })
                .collect(),
        }
    }
}

/// Quotes a CSV field when it contains a separator, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV text with CRLF line ends and a mandatory header row.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let line = |fields: &mut dyn Iterator<Item = String>| fields.collect::<Vec<_>>().join(",") + "\r\n";
    out.push_str(&line(&mut header.iter().map(|h| csv_field(h))));
    for r in rows {
        out.push_str(&line(&mut r.iter().map(|f| csv_field(f))));
    }
    out
}

/// Curves sharing a grid as one table `r, <name>, …`.
pub fn curves_csv(curves: &[(&str, &SecondOrderCurve)]) -> String {
    let mut header = vec!["r"];
    header.extend(curves.iter().map(|(n, _)| *n));
    let n = curves.first().map_or(0, |(_, c)| c.grid.len());
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row = vec![curves[0].1.grid[i].0.to_string()];
            row.extend(curves.iter().map(|(_, c)| c.grid[i].1.to_string()));
            row
        })
        .collect();
    csv_table(&header, &rows)
}
