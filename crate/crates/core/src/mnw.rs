//! The MNW cell-division construction `Y(t, W)`, the iteration `⊞`, line
//! sections and same-cell queries.
//!
//! Every live cell owns an RNG seeded from its parent's seed and its side of
//! the split, so a realization depends only on the master seed. Edges are
//! numbered by birth time once the recursion is done.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexPolygon, GeometryError, LineP, Point, Segment, EPS};
use crate::line_measure::{DrivingMeasure, LineMeasureError};

pub const DEFAULT_CELL_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MnwError {
    #[error("time horizon must be non-negative and finite, got {0}")]
    BadTime(f64),
    #[error("window has zero hit measure")]
    ZeroHitMeasure,
    #[error("cell count exceeded the cap of {0}")]
    CellCap(usize),
    #[error("filler tessellation uses a different driving measure")]
    MeasureMismatch,
    #[error("point lies on an edge")]
    PointOnEdge,
    #[error("could not draw a non-degenerate splitting line")]
    SplitFailed,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Measure(#[from] LineMeasureError),
}

/// What a piece of cell boundary, or an edge endpoint, lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    /// Side of the window polygon.
    Window(usize),
    /// Maximal edge (by id).
    Edge(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InternalVertex {
    pub point: Point,
    /// Younger edge that ends here.
    pub child: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEdge {
    pub id: usize,
    pub segment: Segment,
    pub birth_time: f64,
    /// Sorted from `segment.a` to `segment.b`.
    pub internal_vertices: Vec<InternalVertex>,
    /// Supports of the two endpoints.
    pub ends: [Owner; 2],
}

impl MaxEdge {
    pub fn boundary_endpoints(&self) -> usize {
        self.ends
            .iter()
            .filter(|o| matches!(o, Owner::Window(_)))
            .count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub segment: Segment,
    pub owner: Owner,
}

/// Final cell; arc `i` is side `i` of the polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub polygon: ConvexPolygon,
    pub boundary_arcs: Vec<BoundaryArc>,
}

impl CellState {
    fn new(polygon: ConvexPolygon, owners: &[Owner]) -> Self {
        let boundary_arcs = polygon
            .sides()
            .zip(owners)
            .map(|(segment, &owner)| BoundaryArc { segment, owner })
            .collect();
        Self {
            polygon,
            boundary_arcs,
        }
    }

    pub fn owners(&self) -> Vec<Owner> {
        self.boundary_arcs.iter().map(|a| a.owner).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tessellation {
    pub window: ConvexPolygon,
    pub t: f64,
    pub edges: Vec<MaxEdge>,
    pub cells: Vec<CellState>,
    pub lam: DrivingMeasure,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct ConstructOptions {
    pub cell_cap: usize,
    /// Subtrees with more expected splits than this run on the rayon pool.
    pub parallel_threshold: f64,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self {
            cell_cap: DEFAULT_CELL_CAP,
            parallel_threshold: 64.0,
        }
    }
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn child_seed(parent: u64, side: u64) -> u64 {
    splitmix64(parent ^ splitmix64(side.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum RawOwner {
    Window(usize),
    Edge(u64),
}

struct RawEdge {
    key: u64,
    birth: f64,
    segment: Segment,
    ends: [RawOwner; 2],
}

#[derive(Default)]
struct RawOut {
    edges: Vec<RawEdge>,
    cells: Vec<(ConvexPolygon, Vec<RawOwner>)>,
}

impl RawOut {
    fn append(&mut self, mut o: RawOut) {
        self.edges.append(&mut o.edges);
        self.cells.append(&mut o.cells);
    }
}

struct Ctx<'a> {
    lam: &'a DrivingMeasure,
    t: f64,
    opts: ConstructOptions,
    cells: AtomicUsize,
}

struct Job {
    poly: ConvexPolygon,
    owners: Vec<RawOwner>,
    seed: u64,
    time: f64,
}

/// `Y(t, W)` from a seed drawn from `rng`.
pub fn construct<R: Rng + ?Sized>(
    lam: &DrivingMeasure,
    window: &ConvexPolygon,
    t: f64,
    rng: &mut R,
) -> Result<Tessellation, MnwError> {
    construct_seeded(lam, window, t, rng.next_u64(), ConstructOptions::default())
}

/// `Y(t, W)` from an explicit master seed.
pub fn construct_seeded(
    lam: &DrivingMeasure,
    window: &ConvexPolygon,
    t: f64,
    seed: u64,
    opts: ConstructOptions,
) -> Result<Tessellation, MnwError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(MnwError::BadTime(t));
    }
    if !(lam.hit_measure_convex(window) > 0.0) {
        return Err(MnwError::ZeroHitMeasure);
    }
    let ctx = Ctx {
        lam,
        t,
        opts,
        cells: AtomicUsize::new(1),
    };
    let root = Job {
        poly: window.clone(),
        owners: (0..window.len()).map(RawOwner::Window).collect(),
        seed: splitmix64(seed),
        time: 0.0,
    };
    let raw = run(root, &ctx)?;
    Ok(assemble(window.clone(), t, lam.clone(), seed, raw))
}

fn run(job: Job, ctx: &Ctx<'_>) -> Result<RawOut, MnwError> {
    let rate = ctx.lam.hit_measure_convex(&job.poly);
    if rate * (ctx.t - job.time) > ctx.opts.parallel_threshold {
        match split_once(job, rate, ctx)? {
            Split::Leaf(out) => Ok(out),
            Split::Children(edge, a, b) => {
                let (ra, rb) = rayon::join(|| run(a, ctx), || run(b, ctx));
                let mut out = RawOut::default();
                out.edges.push(edge);
                out.append(ra?);
                out.append(rb?);
                Ok(out)
            }
        }
    } else {
        run_serial(job, ctx)
    }
}

fn run_serial(job: Job, ctx: &Ctx<'_>) -> Result<RawOut, MnwError> {
    let mut out = RawOut::default();
    let mut stack = vec![job];
    while let Some(job) = stack.pop() {
        let rate = ctx.lam.hit_measure_convex(&job.poly);
        match split_once(job, rate, ctx)? {
            Split::Leaf(o) => out.append(o),
            Split::Children(edge, a, b) => {
                out.edges.push(edge);
                // b first so that a is processed first
                stack.push(b);
                stack.push(a);
            }
        }
    }
    Ok(out)
}

enum Split {
    Leaf(RawOut),
    Children(RawEdge, Job, Job),
}

fn split_once(job: Job, rate: f64, ctx: &Ctx<'_>) -> Result<Split, MnwError> {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let clock = if rate > 0.0 {
        job.time + Exp::new(rate).expect("positive rate").sample(&mut rng)
    } else {
        f64::INFINITY
    };
    if clock > ctx.t {
        let mut out = RawOut::default();
        out.cells.push((job.poly, job.owners));
        return Ok(Split::Leaf(out));
    }
    if ctx.cells.fetch_add(1, Ordering::Relaxed) + 1 > ctx.opts.cell_cap {
        return Err(MnwError::CellCap(ctx.opts.cell_cap));
    }
    let mut attempts = 0;
    let crossing = loop {
        let line = ctx.lam.sample_line_hitting(&job.poly, &mut rng)?;
        match job.poly.crossing(&line) {
            Ok(c) => break c,
            Err(_) if attempts < 1000 => attempts += 1,
            Err(_) => return Err(MnwError::SplitFailed),
        }
    };
    let parts = job.poly.split_at(&crossing);
    let key = job.seed;
    let map = |sides: &[Option<usize>]| -> Vec<RawOwner> {
        sides
            .iter()
            .map(|s| match s {
                Some(i) => job.owners[*i],
                None => RawOwner::Edge(key),
            })
            .collect()
    };
    let edge = RawEdge {
        key,
        birth: clock,
        segment: Segment::new(crossing.p, crossing.q),
        ends: [
            job.owners[crossing.pos_to_neg],
            job.owners[crossing.neg_to_pos],
        ],
    };
    let pos_owners = map(&parts.positive.1);
    let neg_owners = map(&parts.negative.1);
    let a = Job {
        poly: parts.positive.0,
        owners: pos_owners,
        seed: child_seed(job.seed, 0),
        time: clock,
    };
    let b = Job {
        poly: parts.negative.0,
        owners: neg_owners,
        seed: child_seed(job.seed, 1),
        time: clock,
    };
    Ok(Split::Children(edge, a, b))
}

fn assemble(
    window: ConvexPolygon,
    t: f64,
    lam: DrivingMeasure,
    seed: u64,
    mut raw: RawOut,
) -> Tessellation {
    raw.edges
        .sort_by(|x, y| x.birth.total_cmp(&y.birth).then(x.key.cmp(&y.key)));
    let ids: HashMap<u64, usize> = raw
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.key, i))
        .collect();
    let conv = |o: RawOwner| match o {
        RawOwner::Window(s) => Owner::Window(s),
        RawOwner::Edge(k) => Owner::Edge(ids[&k]),
    };
    let mut edges: Vec<MaxEdge> = raw
        .edges
        .iter()
        .enumerate()
        .map(|(id, e)| MaxEdge {
            id,
            segment: e.segment,
            birth_time: e.birth,
            internal_vertices: Vec::new(),
            ends: [conv(e.ends[0]), conv(e.ends[1])],
        })
        .collect();
    register_internal_vertices(&mut edges);
    let cells = raw
        .cells
        .into_iter()
        .map(|(poly, owners)| {
            let o: Vec<Owner> = owners.into_iter().map(conv).collect();
            CellState::new(poly, &o)
        })
        .collect();
    Tessellation {
        window,
        t,
        edges,
        cells,
        lam,
        seed,
    }
}

/// Rebuilds every edge's internal-vertex list from the endpoint owners.
fn register_internal_vertices(edges: &mut [MaxEdge]) {
    for e in edges.iter_mut() {
        e.internal_vertices.clear();
    }
    let mut incoming: Vec<(usize, InternalVertex)> = Vec::new();
    for e in edges.iter() {
        for (k, o) in e.ends.iter().enumerate() {
            if let Owner::Edge(parent) = o {
                let point = if k == 0 { e.segment.a } else { e.segment.b };
                incoming.push((*parent, InternalVertex { point, child: e.id }));
            }
        }
    }
    for (parent, v) in incoming {
        edges[parent].internal_vertices.push(v);
    }
    for e in edges.iter_mut() {
        let a = e.segment.a;
        let d = e.segment.b - a;
        e.internal_vertices
            .sort_by(|x, y| (x.point - a).dot(d).total_cmp(&(y.point - a).dot(d)));
    }
}

impl Tessellation {
    /// Number of edge endpoints on the window boundary.
    pub fn boundary_endpoints(&self) -> usize {
        self.edges.iter().map(|e| e.boundary_endpoints()).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.segment.length()).sum()
    }

    /// The prefix `Y(s, W)` for `s ≤ t`: edges born by `s` and the cells
    /// they bound, rebuilt by replaying the splits.
    pub fn at_time(&self, s: f64) -> Result<Tessellation, MnwError> {
        if !(s >= 0.0) {
            return Err(MnwError::BadTime(s));
        }
        if s >= self.t {
            return Ok(self.clone());
        }
        let keep = self.edges.partition_point(|e| e.birth_time <= s);
        let mut edges: Vec<MaxEdge> = self.edges[..keep].to_vec();
        register_internal_vertices(&mut edges);
        let cells = rebuild_cells(&self.window, &edges);
        Ok(Tessellation {
            window: self.window.clone(),
            t: s,
            edges,
            cells,
            lam: self.lam.clone(),
            seed: self.seed,
        })
    }

    /// `Y ∩ W` for a convex `W` inside the window. Edge ids are renumbered in
    /// birth order among surviving traces.
    pub fn restrict(&self, w: &ConvexPolygon) -> Tessellation {
        let mut new_id: Vec<Option<usize>> = vec![None; self.edges.len()];
        let mut edges: Vec<MaxEdge> = Vec::new();
        for e in &self.edges {
            let (clipped, cut) = match w.clip_segment(&e.segment) {
                Some(c) => c,
                None => continue,
            };
            let id = edges.len();
            new_id[e.id] = Some(id);
            let mut ends = [Owner::Window(0); 2];
            for k in 0..2 {
                let p = if k == 0 { clipped.a } else { clipped.b };
                ends[k] = match cut[k] {
                    Some(side) => Owner::Window(side),
                    None => match e.ends[k] {
                        Owner::Edge(o) => match new_id[o] {
                            Some(n) => Owner::Edge(n),
                            None => Owner::Window(nearest_side(w, p)),
                        },
                        Owner::Window(_) => Owner::Window(nearest_side(w, p)),
                    },
                };
            }
            edges.push(MaxEdge {
                id,
                segment: clipped,
                birth_time: e.birth_time,
                internal_vertices: Vec::new(),
                ends,
            });
        }
        register_internal_vertices(&mut edges);
        let mut cells = Vec::new();
        for c in &self.cells {
            let owners: Vec<Owner> = c
                .boundary_arcs
                .iter()
                .map(|a| match a.owner {
                    Owner::Edge(o) => new_id[o].map_or(Owner::Window(usize::MAX), Owner::Edge),
                    Owner::Window(_) => Owner::Window(usize::MAX),
                })
                .collect();
            if let Some((poly, mut own)) = intersect_with_owners(&c.polygon, &owners, w) {
                for (i, o) in own.iter_mut().enumerate() {
                    if *o == Owner::Window(usize::MAX) {
                        let mid = poly.side(i).midpoint();
                        *o = Owner::Window(nearest_side(w, mid));
                    }
                }
                cells.push(CellState::new(poly, &own));
            }
        }
        Tessellation {
            window: w.clone(),
            t: self.t,
            edges,
            cells,
            lam: self.lam.clone(),
            seed: self.seed,
        }
    }

    /// Points where `line` crosses maximal edges, sorted along the line.
    pub fn section_with_line(&self, line: &LineP) -> Vec<Point> {
        if self.window.clip_line(line).is_none() {
            return Vec::new();
        }
        let mut pts: Vec<(f64, Point)> = self
            .edges
            .iter()
            .filter_map(|e| {
                e.segment.crossing_parameter(line).map(|s| {
                    let p = e.segment.point_at(s);
                    (line.coordinate_of(p), p)
                })
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.into_iter().map(|(_, p)| p).collect()
    }

    /// True iff the segment from `x` to `y` crosses no maximal edge.
    pub fn same_cell(&self, x: Point, y: Point) -> Result<bool, MnwError> {
        for e in &self.edges {
            if e.segment.distance_to(x) <= EPS || e.segment.distance_to(y) <= EPS {
                return Err(MnwError::PointOnEdge);
            }
        }
        if x == y {
            return Ok(true);
        }
        let s = Segment::new(x, y);
        Ok(!self.edges.iter().any(|e| e.segment.crosses(&s)))
    }

    /// Index of the cell containing `x`, if any.
    pub fn locate(&self, x: Point) -> Option<usize> {
        self.cells.iter().position(|c| c.polygon.contains(x, 0.0))
    }
}

fn nearest_side(w: &ConvexPolygon, p: Point) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, s) in w.sides().enumerate() {
        let d = s.distance_to(p);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// `poly ∩ w` where side `i` of the result carries the owner of the side it
/// came from; sides created by `w` get `Owner::Window(side of w)`.
fn intersect_with_owners(
    poly: &ConvexPolygon,
    owners: &[Owner],
    w: &ConvexPolygon,
) -> Option<(ConvexPolygon, Vec<Owner>)> {
    let mut ring: Vec<Point> = poly.vertices().to_vec();
    let mut own: Vec<Owner> = owners.to_vec();
    for (j, s) in w.sides().enumerate() {
        let e = s.b - s.a;
        let n = Point::new(e.y, -e.x);
        let c = n.dot(s.a);
        let m = ring.len();
        let mut r2 = Vec::with_capacity(m + 1);
        let mut o2 = Vec::with_capacity(m + 1);
        for i in 0..m {
            let a = ring[i];
            let b = ring[(i + 1) % m];
            let da = n.dot(a) - c;
            let db = n.dot(b) - c;
            if da <= 0.0 {
                r2.push(a);
                // side a -> b (possibly shortened) keeps its owner, unless a
                // is inside and b outside, where the owner still applies up
                // to the crossing point
                o2.push(own[i]);
                if db > 0.0 {
                    r2.push(a.lerp(b, da / (da - db)));
                    o2.push(Owner::Window(j));
                }
            } else if db < 0.0 {
                r2.push(a.lerp(b, da / (da - db)));
                o2.push(own[i]);
            }
        }
        ring = r2;
        own = o2;
        if ring.len() < 3 {
            return None;
        }
    }
    // drop zero-length sides
    let mut r3: Vec<Point> = Vec::with_capacity(ring.len());
    let mut o3: Vec<Owner> = Vec::with_capacity(ring.len());
    let m = ring.len();
    for i in 0..m {
        if ring[i].dist(ring[(i + 1) % m]) > EPS {
            r3.push(ring[i]);
            o3.push(own[i]);
        }
    }
    if r3.len() < 3 {
        return None;
    }
    let poly = ConvexPolygon::from_vertices_unchecked(r3);
    let diam = poly.diameter();
    if poly.area() <= EPS * diam.max(EPS) {
        return None;
    }
    Some((poly, o3))
}

/// Replays the splits of `edges` (sorted by birth) on `window`.
fn rebuild_cells(window: &ConvexPolygon, edges: &[MaxEdge]) -> Vec<CellState> {
    let mut cells: Vec<(ConvexPolygon, Vec<Owner>)> =
        vec![(window.clone(), (0..window.len()).map(Owner::Window).collect())];
    for e in edges {
        let mid = e.segment.midpoint();
        let idx = match cells.iter().position(|(p, _)| p.contains(mid, 1e-12)) {
            Some(i) => i,
            None => continue,
        };
        let (poly, owners) = cells.swap_remove(idx);
        let line = LineP::through(e.segment.a, e.segment.b);
        match poly.crossing(&line) {
            Ok(c) => {
                let parts = poly.split_at(&c);
                for (p, sides) in [parts.positive, parts.negative] {
                    let o = sides
                        .iter()
                        .map(|s| s.map_or(Owner::Edge(e.id), |i| owners[i]))
                        .collect();
                    cells.push((p, o));
                }
            }
            Err(_) => cells.push((poly, owners)),
        }
    }
    cells
        .into_iter()
        .map(|(p, o)| CellState::new(p, &o))
        .collect()
}

/// Filler that builds `Y(t, C)` directly on each frame cell.
pub fn stit_filler(
    lam: &DrivingMeasure,
    t: f64,
) -> impl FnMut(&CellState, &mut ChaCha8Rng) -> Result<Tessellation, MnwError> + '_ {
    move |cell, rng| {
        construct_seeded(
            lam,
            &cell.polygon,
            t,
            rng.next_u64(),
            ConstructOptions::default(),
        )
    }
}

/// Filler that builds `Y(t, B)` on a square `B` covering the cell; `iterate`
/// clips it to the cell.
pub fn stit_filler_bounding(
    lam: &DrivingMeasure,
    t: f64,
) -> impl FnMut(&CellState, &mut ChaCha8Rng) -> Result<Tessellation, MnwError> + '_ {
    move |cell, rng| {
        let (c, r) = cell.polygon.bounding_disk();
        let b = ConvexPolygon::centered_square(c, 2.0 * r * 1.01)?;
        construct_seeded(lam, &b, t, rng.next_u64(), ConstructOptions::default())
    }
}

/// `frame ⊞ fillers`: each frame cell is refined by an independent filler
/// clipped to it. Filler edges are appended after the frame edges with birth
/// times offset by `frame.t`; filler endpoints on a frame edge become its
/// internal vertices.
pub fn iterate<F, R>(frame: &Tessellation, mut filler: F, rng: &mut R) -> Result<Tessellation, MnwError>
where
    F: FnMut(&CellState, &mut ChaCha8Rng) -> Result<Tessellation, MnwError>,
    R: Rng + ?Sized,
{
    let mut edges: Vec<MaxEdge> = frame.edges.clone();
    let mut cells: Vec<CellState> = Vec::new();
    let mut t_fill: f64 = 0.0;
    for cell in &frame.cells {
        let mut cell_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let f = filler(cell, &mut cell_rng)?;
        if f.lam != frame.lam {
            return Err(MnwError::MeasureMismatch);
        }
        t_fill = t_fill.max(f.t);
        let f = if f.window.vertices() == cell.polygon.vertices() {
            f
        } else {
            f.restrict(&cell.polygon)
        };
        let arc_owner = cell.owners();
        let base = edges.len();
        let remap = |o: Owner| match o {
            Owner::Window(s) => arc_owner[s],
            Owner::Edge(k) => Owner::Edge(base + k),
        };
        for e in &f.edges {
            edges.push(MaxEdge {
                id: base + e.id,
                segment: e.segment,
                birth_time: frame.t + e.birth_time,
                internal_vertices: Vec::new(),
                ends: [remap(e.ends[0]), remap(e.ends[1])],
            });
        }
        for c in &f.cells {
            let o: Vec<Owner> = c.boundary_arcs.iter().map(|a| remap(a.owner)).collect();
            cells.push(CellState::new(c.polygon.clone(), &o));
        }
    }
    // renumber by birth so ids stay in birth order
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| edges[a].birth_time.total_cmp(&edges[b].birth_time));
    let mut rank = vec![0usize; edges.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let fix = |o: Owner| match o {
        Owner::Edge(k) => Owner::Edge(rank[k]),
        w => w,
    };
    let mut sorted: Vec<MaxEdge> = order
        .iter()
        .map(|&old| {
            let e = &edges[old];
            MaxEdge {
                id: rank[old],
                segment: e.segment,
                birth_time: e.birth_time,
                internal_vertices: Vec::new(),
                ends: [fix(e.ends[0]), fix(e.ends[1])],
            }
        })
        .collect();
    register_internal_vertices(&mut sorted);
    for c in &mut cells {
        for a in &mut c.boundary_arcs {
            a.owner = fix(a.owner);
        }
    }
    Ok(Tessellation {
        window: frame.window.clone(),
        t: frame.t + t_fill,
        edges: sorted,
        cells,
        lam: frame.lam.clone(),
        seed: frame.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn iso() -> DrivingMeasure {
        DrivingMeasure::isotropic(1.0)
    }

    fn check_structure(y: &Tessellation) {
        assert_eq!(y.cells.len(), y.edges.len() + 1);
        let area: f64 = y.cells.iter().map(|c| c.polygon.area()).sum();
        assert!((area - y.window.area()).abs() <= 1e-7 * y.window.area());
        let n_internal: usize = y.edges.iter().map(|e| e.internal_vertices.len()).sum();
        assert_eq!(n_internal, 2 * y.edges.len() - y.boundary_endpoints());
        for e in &y.edges {
            assert!(e.birth_time <= y.t);
            for v in &e.internal_vertices {
                assert!(y.edges[v.child].birth_time > e.birth_time);
                assert!(e.segment.distance_to(v.point) < 1e-9);
            }
            for (k, o) in e.ends.iter().enumerate() {
                let p = if k == 0 { e.segment.a } else { e.segment.b };
                match o {
                    Owner::Window(s) => assert!(y.window.side(*s).distance_to(p) < 1e-9),
                    Owner::Edge(p_id) => assert!(y.edges[*p_id].segment.distance_to(p) < 1e-9),
                }
            }
        }
        for c in &y.cells {
            for a in &c.boundary_arcs {
                match a.owner {
                    Owner::Window(s) => {
                        assert!(y.window.side(s).distance_to(a.segment.midpoint()) < 1e-9)
                    }
                    Owner::Edge(id) => {
                        assert!(y.edges[id].segment.distance_to(a.segment.midpoint()) < 1e-9)
                    }
                }
            }
        }
    }

    #[test]
    fn zero_time_is_empty() {
        let y = construct_seeded(&iso(), &ConvexPolygon::unit_square(), 0.0, 1, Default::default()).unwrap();
        assert!(y.edges.is_empty());
        assert_eq!(y.cells.len(), 1);
        assert!(y.section_with_line(&LineP::new(0.0, 0.5)).is_empty());
    }

    #[test]
    fn negative_time_rejected() {
        assert_eq!(
            construct_seeded(&iso(), &ConvexPolygon::unit_square(), -1.0, 1, Default::default()).unwrap_err(),
            MnwError::BadTime(-1.0)
        );
    }

    #[test]
    fn structure_holds_on_many_runs() {
        let w = ConvexPolygon::regular(7, 1.0, Point::new(0.2, 0.1)).unwrap();
        for seed in 0..200 {
            for lam in [iso(), DrivingMeasure::orthogonal_pair(1.0)] {
                let y = construct_seeded(&lam, &w, 3.0, seed, Default::default()).unwrap();
                check_structure(&y);
            }
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let w = ConvexPolygon::unit_square();
        let serial = ConstructOptions {
            parallel_threshold: f64::INFINITY,
            ..Default::default()
        };
        let parallel = ConstructOptions {
            parallel_threshold: 2.0,
            ..Default::default()
        };
        let a = construct_seeded(&iso(), &w, 12.0, 99, serial).unwrap();
        let b = construct_seeded(&iso(), &w, 12.0, 99, parallel).unwrap();
        assert_eq!(a.edges, b.edges);
        assert!(a.edges.len() > 50);
    }

    #[test]
    fn at_time_replays_prefix() {
        let w = ConvexPolygon::unit_square();
        let y = construct_seeded(&iso(), &w, 6.0, 5, Default::default()).unwrap();
        let p = y.at_time(3.0).unwrap();
        check_structure(&p);
        assert!(p.edges.iter().all(|e| e.birth_time <= 3.0));
        assert_eq!(
            p.edges.len(),
            y.edges.iter().filter(|e| e.birth_time <= 3.0).count()
        );
    }

    #[test]
    fn restriction_structure() {
        let v = ConvexPolygon::rectangle(-0.5, -0.5, 1.5, 1.5).unwrap();
        let w = ConvexPolygon::unit_square();
        for seed in 0..50 {
            let y = construct_seeded(&iso(), &v, 3.0, seed, Default::default()).unwrap();
            let r = y.restrict(&w);
            check_structure(&r);
        }
    }

    #[test]
    fn iteration_structure_and_identity_frame() {
        let w = ConvexPolygon::unit_square();
        let lam = iso();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let frame = construct(&lam, &w, 1.5, &mut rng).unwrap();
            let y = iterate(&frame, stit_filler(&lam, 1.5), &mut rng).unwrap();
            check_structure(&y);
            assert!((y.t - 3.0).abs() < 1e-15);
            let z = iterate(&frame, stit_filler_bounding(&lam, 1.0), &mut rng).unwrap();
            check_structure(&z);
        }
        let empty = construct(&lam, &w, 0.0, &mut rng).unwrap();
        let y = iterate(&empty, stit_filler(&lam, 1.0), &mut rng).unwrap();
        check_structure(&y);
    }

    #[test]
    fn iteration_rejects_measure_mismatch() {
        let w = ConvexPolygon::unit_square();
        let lam = iso();
        let other = DrivingMeasure::orthogonal_pair(1.0);
        let frame = construct_seeded(&lam, &w, 1.0, 1, Default::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            iterate(&frame, stit_filler(&other, 1.0), &mut rng).unwrap_err(),
            MnwError::MeasureMismatch
        );
    }

    #[test]
    fn mean_edge_count_small_run() {
        let w = ConvexPolygon::unit_square();
        let n = 4000;
        let counts: Vec<f64> = (0..n)
            .map(|s| construct_seeded(&iso(), &w, 1.0, s, Default::default()).unwrap().edges.len() as f64)
            .collect();
        let m = counts.iter().sum::<f64>() / n as f64;
        let v = counts.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - 5.0 / PI).abs() < 3.0 * (v / n as f64).sqrt());
    }

    #[test]
    fn same_cell_basics() {
        let w = ConvexPolygon::unit_square();
        let y = construct_seeded(&iso(), &w, 4.0, 8, Default::default()).unwrap();
        let x = Point::new(0.123, 0.456);
        if let Ok(b) = y.same_cell(x, x) {
            assert!(b);
        }
        // agrees with cell location
        for k in 0..50 {
            let a = Point::new(0.01 + 0.98 * ((k * 37 % 50) as f64 / 50.0), 0.01 + 0.98 * (k as f64 / 50.0));
            let b = Point::new(0.5, 0.5);
            if let Ok(same) = y.same_cell(a, b) {
                assert_eq!(same, y.locate(a) == y.locate(b));
            }
        }
        // monotone refinement
        let early = y.at_time(1.0).unwrap();
        for k in 0..50 {
            let a = Point::new(0.02 * k as f64 + 0.001, 0.3);
            let b = Point::new(0.7, 0.9 - 0.01 * k as f64);
            if let (Ok(late), Ok(e)) = (y.same_cell(a, b), early.same_cell(a, b)) {
                assert!(!late || e);
            }
        }
    }

    #[test]
    fn point_on_edge_is_an_error() {
        let w = ConvexPolygon::unit_square();
        let y = construct_seeded(&iso(), &w, 2.0, 4, Default::default()).unwrap();
        let e = &y.edges[0];
        assert_eq!(
            y.same_cell(e.segment.midpoint(), Point::new(0.5, 0.5)).unwrap_err(),
            MnwError::PointOnEdge
        );
    }

    #[test]
    fn cell_cap_aborts() {
        let w = ConvexPolygon::unit_square();
        let opts = ConstructOptions {
            cell_cap: 10,
            ..Default::default()
        };
        assert_eq!(
            construct_seeded(&iso(), &w, 50.0, 1, opts).unwrap_err(),
            MnwError::CellCap(10)
        );
    }
}
