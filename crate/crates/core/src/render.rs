//! SVG line drawings of tessellations.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::mnw::Tessellation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgOptions {
    /// Width of the image in pixels; the height follows the window aspect.
    pub width_px: f64,
    /// Edge stroke as a fraction of the window diameter.
    pub stroke: f64,
    pub vertex_markers: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self { width_px: 600.0, stroke: 0.002, vertex_markers: false }
    }
}

/// Window outline plus one polyline per maximal edge through its internal
/// vertices, in window coordinates with the y axis pointing up.
pub fn render_svg(y: &Tessellation, opts: &SvgOptions) -> String {
    let v = y.window.vertices();
    let (mut lo, mut hi) = (v[0], v[0]);
    for p in v {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let diam = y.window.diameter();
    let sw = opts.stroke * diam;
    let pad = 2.0 * sw;
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let px_h = opts.width_px * h / w;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="{} {} {} {}">"#,
        opts.width_px,
        px_h,
        lo.x - pad,
        -(hi.y + pad),
        w,
        h
    );
    let _ = writeln!(
        s,
        r#"<g transform="scale(1,-1)" fill="none" stroke="black" stroke-linecap="round" stroke-linejoin="round" stroke-width="{sw}">"#
    );
    let _ = writeln!(s, r#"<polygon points="{}" stroke-width="{}"/>"#, points(v.iter().copied()), 1.5 * sw);
    for e in &y.edges {
        let path = std::iter::once(e.segment.a)
            .chain(e.internal_vertices.iter().map(|iv| iv.point))
            .chain(std::iter::once(e.segment.b));
        let _ = writeln!(s, r#"<polyline points="{}"/>"#, points(path));
    }
    if opts.vertex_markers {
        let _ = writeln!(s, r#"<g fill="black" stroke="none">"#);
        for e in &y.edges {
            for iv in &e.internal_vertices {
                let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="{}"/>"#, iv.point.x, iv.point.y, 2.0 * sw);
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</g>\n</svg>\n");
    s
}

fn points(it: impl Iterator<Item = Point>) -> String {
    it.map(|p| format!("{},{}", p.x, p.y)).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolygon;
    use crate::line_measure::DrivingMeasure;
    use crate::mnw::construct_seeded;

    #[test]
    fn empty_tessellation_draws_only_the_window() {
        let y = construct_seeded(&DrivingMeasure::isotropic(1.0), &ConvexPolygon::unit_square(), 0.0, 1, Default::default())
            .unwrap();
        let s = render_svg(&y, &SvgOptions::default());
        assert!(s.contains("<polygon"));
        assert!(!s.contains("<polyline"));
    }

    #[test]
    fn one_polyline_per_edge_and_markers() {
        let y = construct_seeded(&DrivingMeasure::isotropic(1.0), &ConvexPolygon::unit_square(), 6.0, 2, Default::default())
            .unwrap();
        let opts = SvgOptions { vertex_markers: true, ..Default::default() };
        let s = render_svg(&y, &opts);
        assert_eq!(s.matches("<polyline").count(), y.edges.len());
        let n_internal: usize = y.edges.iter().map(|e| e.internal_vertices.len()).sum();
        assert_eq!(s.matches("<circle").count(), n_internal);
    }
}
