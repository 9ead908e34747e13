//! Axis-aligned rectangles, structured triangle meshes and the interface
//! polyline bounding the subregion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when deciding whether a point belongs to a rectangle or triangle.
pub const LOCATE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dir: [f64; 2], scale: f64) -> Self {
        Self::new(self.x + scale * dir[0], self.y + scale * dir[1])
    }

    pub fn lerp(self, other: Point, t: f64) -> Self {
        Self::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let ok = [x0, y0, x1, y1].iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1;
        if !ok {
            return Err(Error::InvalidRect { x0, y0, x1, y1 });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn unit_square() -> Self {
        Self { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1 + tol && p.y >= self.y0 - tol && p.y <= self.y1 + tol
    }

    /// Closure containment of `other` in `self`.
    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x0 >= self.x0 - tol && other.x1 <= self.x1 + tol && other.y0 >= self.y0 - tol && other.y1 <= self.y1 + tol
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.x0 - p.x).max(p.x - self.x1).max(0.0);
        let dy = (self.y0 - p.y).max(p.y - self.y1).max(0.0);
        dx.hypot(dy)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }

    pub fn centroid(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    /// Outward unit normal of this side of a rectangle.
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    DirichletBottom,
    NeumannTop,
    NeumannSide,
    InterfaceGamma,
    Interior,
}

/// Tag carried by the boundary edges of each rectangle side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideTags {
    pub bottom: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub left: BoundaryTag,
}

impl SideTags {
    /// Fixed temperature at the bottom, flux on top, insulated sides.
    pub const GLOBAL: SideTags =
        SideTags { bottom: BoundaryTag::DirichletBottom, right: BoundaryTag::NeumannSide, top: BoundaryTag::NeumannTop, left: BoundaryTag::NeumannSide };

    /// Every side of a subregion mesh is part of the interface.
    pub const INTERFACE: SideTags = SideTags {
        bottom: BoundaryTag::InterfaceGamma,
        right: BoundaryTag::InterfaceGamma,
        top: BoundaryTag::InterfaceGamma,
        left: BoundaryTag::InterfaceGamma,
    };

    pub fn get(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Bottom => self.bottom,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Left => self.left,
        }
    }
}

/// Structured triangulation of a rectangle.
///
/// Cell `(i, j)` owns triangles `2 (j nx + i)` (below the lower-left to
/// upper-right diagonal) and `2 (j nx + i) + 1` (above it). Local edge `k` of a
/// triangle joins its vertices `k` and `(k + 1) % 3`.
#[derive(Clone, Debug)]
pub struct Mesh {
    rect: Rect,
    nx: usize,
    ny: usize,
    side_tags: SideTags,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<(usize, Option<usize>)>,
    triangle_edges: Vec<[usize; 3]>,
    edge_tags: Vec<BoundaryTag>,
}

/// Mesh of `rect` with the global side tagging (Dirichlet bottom, Neumann elsewhere).
pub fn generate_rect_mesh(rect: Rect, nx: usize, ny: usize) -> Result<Mesh> {
    Mesh::structured(rect, nx, ny, SideTags::GLOBAL)
}

impl Mesh {
    pub fn structured(rect: Rect, nx: usize, ny: usize, side_tags: SideTags) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidDivisions { nx, ny });
        }
        let coord = |lo: f64, hi: f64, k: usize, n: usize| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            }
        };
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = coord(rect.y0, rect.y1, j, ny);
            for i in 0..=nx {
                vertices.push(Point::new(coord(rect.x0, rect.x1, i, nx), y));
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * nx * ny + nx + ny);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<(usize, Option<usize>)> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *slot = match lookup.get(&key) {
                    Some(&e) => {
                        edge_triangles[e].1 = Some(t);
                        e
                    }
                    None => {
                        let e = edges.len();
                        lookup.insert(key, e);
                        edges.push([key.0, key.1]);
                        edge_triangles.push((t, None));
                        e
                    }
                };
            }
            triangle_edges.push(local);
        }

        let edge_tags = edges
            .iter()
            .zip(&edge_triangles)
            .map(|(e, adj)| {
                if adj.1.is_some() {
                    return BoundaryTag::Interior;
                }
                let (a, b) = (vertices[e[0]], vertices[e[1]]);
                let side = if a.y == rect.y0 && b.y == rect.y0 {
                    Side::Bottom
                } else if a.y == rect.y1 && b.y == rect.y1 {
                    Side::Top
                } else if a.x == rect.x0 && b.x == rect.x0 {
                    Side::Left
                } else {
                    Side::Right
                };
                side_tags.get(side)
            })
            .collect();

        Ok(Self { rect, nx, ny, side_tags, vertices, triangles, edges, edge_triangles, triangle_edges, edge_tags })
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn divisions(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn side_tags(&self) -> &SideTags {
        &self.side_tags
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_triangles(&self) -> &[(usize, Option<usize>)] {
        &self.edge_triangles
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn edge_tags(&self) -> &[BoundaryTag] {
        &self.edge_tags
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Cell widths along x and y.
    pub fn cell_size(&self) -> (f64, f64) {
        (self.rect.width() / self.nx as f64, self.rect.height() / self.ny as f64)
    }

    /// Nominal mesh size: the larger cell width.
    pub fn h(&self) -> f64 {
        let (dx, dy) = self.cell_size();
        dx.max(dy)
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.triangle_points(t))
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    ///
    /// Points on shared edges or vertices resolve to the lowest-index
    /// triangle. Points up to [`LOCATE_TOL`] outside the rectangle are
    /// projected onto it first.
    pub fn locate_point(&self, p: Point) -> Result<(usize, [f64; 3])> {
        if !p.x.is_finite() || !p.y.is_finite() || self.rect.distance_to(p) > LOCATE_TOL {
            return Err(Error::PointOutsideDomain(p));
        }
        let q = self.rect.clamp(p);
        let (dx, dy) = self.cell_size();
        let slack = 1e-9;
        let cell_range = |v: f64, lo: f64, d: f64, n: usize| {
            let s = (v - lo) / d;
            let a = (s - slack).floor().max(0.0) as usize;
            let b = ((s + slack).floor().max(0.0) as usize).min(n - 1);
            (a.min(n - 1), b)
        };
        let (i0, i1) = cell_range(q.x, self.rect.x0, dx, self.nx);
        let (j0, j1) = cell_range(q.y, self.rect.y0, dy, self.ny);

        let mut best: Option<(usize, [f64; 3], f64)> = None;
        // rows are visited bottom-up and cells left-to-right, so triangle
        // indices are visited in increasing order
        for j in j0..=j1 {
            for i in i0..=i1 {
                for t in [2 * (j * self.nx + i), 2 * (j * self.nx + i) + 1] {
                    let bary = barycentric(&self.triangle_points(t), q);
                    let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
                    if worst >= -LOCATE_TOL {
                        return Ok((t, clamp_barycentric(bary)));
                    }
                    if best.as_ref().is_none_or(|b| worst > b.2) {
                        best = Some((t, bary, worst));
                    }
                }
            }
        }
        // only reachable through round-off on cell boundaries
        match best {
            Some((t, bary, worst)) if worst > -1e-9 => Ok((t, clamp_barycentric(bary))),
            _ => Err(Error::PointOutsideDomain(p)),
        }
    }

    /// Physical point of barycentric coordinates `bary` in triangle `t`.
    pub fn point_at(&self, t: usize, bary: [f64; 3]) -> Point {
        let [a, b, c] = self.triangle_points(t);
        Point::new(bary[0] * a.x + bary[1] * b.x + bary[2] * c.x, bary[0] * a.y + bary[1] * b.y + bary[2] * c.y)
    }
}

pub fn signed_area(tri: &[Point; 3]) -> f64 {
    let [a, b, c] = tri;
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Barycentric coordinates of `p` with respect to `tri` (not clamped).
pub fn barycentric(tri: &[Point; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = tri;
    let det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let lb = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
    let lc = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
    [1.0 - lb - lc, lb, lc]
}

fn clamp_barycentric(bary: [f64; 3]) -> [f64; 3] {
    let c = bary.map(|l| l.clamp(0.0, 1.0));
    let s: f64 = c.iter().sum();
    c.map(|l| l / s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaClass {
    InteriorInterface,
    OnNeumannBoundary,
    OnDirichletBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSegment {
    pub side: Side,
    pub start: Point,
    pub end: Point,
    /// Unit normal pointing out of the subregion.
    pub normal: [f64; 2],
    pub class: GammaClass,
}

impl GammaSegment {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }
}

/// Boundary of the subregion as four counterclockwise segments
/// (bottom, right, top, left).
#[derive(Clone, Debug)]
pub struct GammaPolyline {
    rect: Rect,
    segments: [GammaSegment; 4],
}

impl GammaPolyline {
    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn segments(&self) -> &[GammaSegment; 4] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(GammaSegment::length).sum()
    }
}

/// Interface polyline of `omega_minus`, classified against the boundary
/// tags of `global_mesh`.
pub fn build_gamma(global_mesh: &Mesh, omega_minus: Rect) -> Result<GammaPolyline> {
    let outer = global_mesh.rect();
    if !outer.contains_rect(&omega_minus, LOCATE_TOL) {
        return Err(Error::NotContained);
    }
    let r = omega_minus;
    let corners = [Point::new(r.x0, r.y0), Point::new(r.x1, r.y0), Point::new(r.x1, r.y1), Point::new(r.x0, r.y1)];
    let on_outer = |side: Side| match side {
        Side::Bottom => (r.y0 - outer.y0).abs() <= LOCATE_TOL,
        Side::Right => (r.x1 - outer.x1).abs() <= LOCATE_TOL,
        Side::Top => (r.y1 - outer.y1).abs() <= LOCATE_TOL,
        Side::Left => (r.x0 - outer.x0).abs() <= LOCATE_TOL,
    };
    let segments = std::array::from_fn(|k| {
        let side = Side::ALL[k];
        let class = if on_outer(side) {
            match global_mesh.side_tags().get(side) {
                BoundaryTag::DirichletBottom => GammaClass::OnDirichletBoundary,
                BoundaryTag::NeumannTop | BoundaryTag::NeumannSide => GammaClass::OnNeumannBoundary,
                BoundaryTag::InterfaceGamma | BoundaryTag::Interior => GammaClass::InteriorInterface,
            }
        } else {
            GammaClass::InteriorInterface
        };
        GammaSegment { side, start: corners[k], end: corners[(k + 1) % 4], normal: side.outward_normal(), class }
    });
    Ok(GammaPolyline { rect: omega_minus, segments })
}
