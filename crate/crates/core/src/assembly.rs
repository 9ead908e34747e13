//! Single-mesh assembly: stiffness, mass, volume and boundary loads, plus
//! the material and source descriptions they consume.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::fe::{barycentric_gradients, basis_gradients, basis_values, FeSpace, SegmentRule, TriangleRule, MAX_LOCAL_DOFS};
use crate::geometry::{barycentric, signed_area, BoundaryTag, Point, Rect};
use crate::sparse::{assemble_csr, CsrMatrix};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Spatially varying material coefficient. Variable coefficients carry an
/// analytic gradient for the coupling terms that need it.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Variable { value: ScalarFn, gradient: GradientFn },
}

impl Coefficient {
    pub fn variable(value: impl Fn(Point) -> f64 + Send + Sync + 'static, gradient: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Coefficient::Variable { value: Arc::new(value), gradient: Arc::new(gradient) }
    }

    /// `c0 + cx x + cy y`, always taking the variable code path.
    pub fn affine(c0: f64, cx: f64, cy: f64) -> Self {
        Self::variable(move |p| c0 + cx * p.x + cy * p.y, move |_| [cx, cy])
    }

    pub fn value(&self, p: Point) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Variable { value, .. } => value(p),
        }
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        match self {
            Coefficient::Constant(_) => [0.0, 0.0],
            Coefficient::Variable { gradient, .. } => gradient(p),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Variable { .. } => write!(f, "Variable(..)"),
        }
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

/// Conductivities (`beta`) and heat capacities (`rho`) outside (`plus`) and
/// inside (`minus`) the subregion.
#[derive(Clone, Debug)]
pub struct MaterialModel {
    pub beta_plus: Coefficient,
    pub beta_minus: Coefficient,
    pub rho_plus: Coefficient,
    pub rho_minus: Coefficient,
}

impl MaterialModel {
    pub fn constant(beta_plus: f64, beta_minus: f64, rho_plus: f64, rho_minus: f64) -> Self {
        Self { beta_plus: beta_plus.into(), beta_minus: beta_minus.into(), rho_plus: rho_plus.into(), rho_minus: rho_minus.into() }
    }

    pub fn is_constant(&self) -> bool {
        [&self.beta_plus, &self.beta_minus, &self.rho_plus, &self.rho_minus].iter().all(|c| c.is_constant())
    }

    /// Whether the conductivities need the gradient coupling term.
    pub fn has_variable_conductivity(&self) -> bool {
        !(self.beta_plus.is_constant() && self.beta_minus.is_constant())
    }

    /// Discontinuous conductivity of the original problem.
    pub fn beta_at(&self, p: Point, omega_minus: &Rect) -> f64 {
        if omega_minus.contains(p, 0.0) {
            self.beta_minus.value(p)
        } else {
            self.beta_plus.value(p)
        }
    }

    pub fn rho_at(&self, p: Point, omega_minus: &Rect) -> f64 {
        if omega_minus.contains(p, 0.0) {
            self.rho_minus.value(p)
        } else {
            self.rho_plus.value(p)
        }
    }

    /// `beta_plus / beta_minus`.
    pub fn beta_ratio(&self, p: Point) -> f64 {
        self.beta_plus.value(p) / self.beta_minus.value(p)
    }

    /// `rho_plus - rho_minus beta_plus / beta_minus`, the weight of the
    /// subregion time-derivative coupling.
    pub fn capacity_coupling(&self, p: Point) -> f64 {
        self.rho_plus.value(p) - self.rho_minus.value(p) * self.beta_ratio(p)
    }
}

pub type SpaceTimeFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type FluxFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Problem data: volume source `f(x, y, t)`, top-boundary flux `q(x, t)`,
/// bottom temperature and initial temperature. Absent sources are zero.
#[derive(Clone)]
pub struct SourceSpec {
    pub volume: Option<SpaceTimeFn>,
    pub flux: Option<FluxFn>,
    pub dirichlet_value: f64,
    pub initial: ScalarFn,
}

impl SourceSpec {
    /// No sources; initial temperature equal to the boundary temperature.
    pub fn new(dirichlet_value: f64) -> Self {
        Self { volume: None, flux: None, dirichlet_value, initial: Arc::new(move |_| dirichlet_value) }
    }

    pub fn with_volume(mut self, f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.volume = Some(Arc::new(f));
        self
    }

    pub fn with_flux(mut self, q: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.flux = Some(Arc::new(q));
        self
    }

    pub fn with_initial(mut self, u0: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(u0);
        self
    }

    pub fn volume_at(&self, p: Point, t: f64) -> f64 {
        self.volume.as_ref().map_or(0.0, |f| f(p, t))
    }

    pub fn flux_at(&self, x: f64, t: f64) -> f64 {
        self.flux.as_ref().map_or(0.0, |q| q(x, t))
    }
}

impl fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceSpec")
            .field("volume", &self.volume.is_some())
            .field("flux", &self.flux.is_some())
            .field("dirichlet_value", &self.dirichlet_value)
            .finish()
    }
}

pub type ElementMatrix = [[f64; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];

/// `int_T beta grad(phi_a) . grad(phi_b)` on one triangle.
pub fn element_stiffness(tri: &[Point; 3], degree: usize, rule: &TriangleRule, beta: impl Fn(Point) -> f64) -> ElementMatrix {
    let area = signed_area(tri);
    let gl = barycentric_gradients(tri);
    let n = if degree == 1 { 3 } else { 6 };
    let mut k = [[0.0; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    for (bary, w) in rule.points.iter().zip(&rule.weights) {
        let p = map_point(tri, *bary);
        let wq = w * area * beta(p);
        let g = basis_gradients(degree, *bary, &gl);
        for a in 0..n {
            for b in a..n {
                k[a][b] += wq * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    }
    symmetrize(&mut k, n);
    k
}

/// `int_T rho phi_a phi_b` on one triangle.
pub fn element_mass(tri: &[Point; 3], degree: usize, rule: &TriangleRule, rho: impl Fn(Point) -> f64) -> ElementMatrix {
    let area = signed_area(tri);
    let n = if degree == 1 { 3 } else { 6 };
    let mut m = [[0.0; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    for (bary, w) in rule.points.iter().zip(&rule.weights) {
        let wq = w * area * rho(map_point(tri, *bary));
        let phi = basis_values(degree, *bary);
        for a in 0..n {
            for b in a..n {
                m[a][b] += wq * phi[a] * phi[b];
            }
        }
    }
    symmetrize(&mut m, n);
    m
}

fn symmetrize(m: &mut ElementMatrix, n: usize) {
    for a in 0..n {
        for b in 0..a {
            m[a][b] = m[b][a];
        }
    }
}

pub fn map_point(tri: &[Point; 3], bary: [f64; 3]) -> Point {
    Point::new(bary[0] * tri[0].x + bary[1] * tri[1].x + bary[2] * tri[2].x, bary[0] * tri[0].y + bary[1] * tri[1].y + bary[2] * tri[2].y)
}

fn assemble_matrix(space: &FeSpace, element: impl Fn(&[Point; 3]) -> ElementMatrix) -> CsrMatrix {
    let mesh = space.mesh();
    let n = space.n_local();
    let mut triplets = Vec::with_capacity(mesh.n_triangles() * n * n);
    for t in 0..mesh.n_triangles() {
        let ke = element(&mesh.triangle_points(t));
        let dofs = space.cell_dofs(t);
        for a in 0..n {
            for b in 0..n {
                triplets.push((dofs[a], dofs[b], ke[a][b]));
            }
        }
    }
    assemble_csr(space.n_dofs(), triplets).expect("cell DOFs are in range")
}

/// Global stiffness matrix `K_ij = int beta grad(phi_i) . grad(phi_j)`.
pub fn assemble_stiffness(space: &FeSpace, beta: impl Fn(Point) -> f64) -> CsrMatrix {
    let rule = TriangleRule::for_degree(space.degree());
    assemble_matrix(space, |tri| element_stiffness(tri, space.degree(), &rule, &beta))
}

/// Global mass matrix `M_ij = int rho phi_i phi_j`.
pub fn assemble_mass(space: &FeSpace, rho: impl Fn(Point) -> f64) -> CsrMatrix {
    let rule = TriangleRule::for_degree(space.degree());
    assemble_matrix(space, |tri| element_mass(tri, space.degree(), &rule, &rho))
}

/// Integration region for volume loads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    All,
    Inside(Rect),
    Outside(Rect),
}

/// Clips a triangle against an axis-aligned rectangle (Sutherland–Hodgman).
pub fn clip_triangle_to_rect(tri: &[Point; 3], rect: &Rect) -> Vec<Point> {
    let mut poly: Vec<Point> = tri.to_vec();
    for plane in 0..4 {
        if poly.is_empty() {
            break;
        }
        let dist = |p: Point| match plane {
            0 => p.x - rect.x0,
            1 => rect.x1 - p.x,
            2 => p.y - rect.y0,
            _ => rect.y1 - p.y,
        };
        let mut out = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let cur = poly[k];
            let next = poly[(k + 1) % poly.len()];
            let (dc, dn) = (dist(cur), dist(next));
            if dc >= 0.0 {
                out.push(cur);
            }
            if (dc >= 0.0) != (dn >= 0.0) {
                let mut q = cur.lerp(next, dc / (dc - dn));
                match plane {
                    0 => q.x = rect.x0,
                    1 => q.x = rect.x1,
                    2 => q.y = rect.y0,
                    _ => q.y = rect.y1,
                }
                out.push(q);
            }
        }
        poly = out;
    }
    poly
}

/// Quadrature points over `tri ∩ rect`: `(barycentric in tri, weight * area)`.
pub fn clipped_quadrature(tri: &[Point; 3], rect: &Rect, rule: &TriangleRule) -> Vec<([f64; 3], f64)> {
    let poly = clip_triangle_to_rect(tri, rect);
    let mut out = Vec::new();
    if poly.len() < 3 {
        return out;
    }
    for k in 1..poly.len() - 1 {
        let sub = [poly[0], poly[k], poly[k + 1]];
        let area = signed_area(&sub);
        if area <= 0.0 {
            continue;
        }
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            out.push((barycentric(tri, map_point(&sub, *b)), w * area));
        }
    }
    out
}

/// `b_i = int_region g phi_i`.
pub fn assemble_volume_load(space: &FeSpace, g: impl Fn(Point) -> f64, region: Region) -> Vec<f64> {
    let mesh = space.mesh();
    let rule = TriangleRule::for_degree(space.degree());
    let n = space.n_local();
    let mut b = vec![0.0; space.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle_points(t);
        let mut local = [0.0; MAX_LOCAL_DOFS];
        let mut add = |bary: [f64; 3], w: f64, sign: f64| {
            let gv = w * g(map_point(&tri, bary));
            let phi = space.basis_values(bary);
            for a in 0..n {
                local[a] += sign * gv * phi[a];
            }
        };
        let area = signed_area(&tri);
        match region {
            Region::All => rule.points.iter().zip(&rule.weights).for_each(|(p, w)| add(*p, w * area, 1.0)),
            Region::Inside(r) => clipped_quadrature(&tri, &r, &rule).into_iter().for_each(|(p, w)| add(p, w, 1.0)),
            Region::Outside(r) => {
                rule.points.iter().zip(&rule.weights).for_each(|(p, w)| add(*p, w * area, 1.0));
                clipped_quadrature(&tri, &r, &rule).into_iter().for_each(|(p, w)| add(p, w, -1.0));
            }
        }
        for (a, &d) in space.cell_dofs(t).iter().enumerate() {
            b[d] += local[a];
        }
    }
    b
}

/// Sub-intervals per boundary edge for boundary-flux quadrature; keeps the
/// narrow Gaussian heat fluxes of the experiments resolved on coarse meshes.
pub const NEUMANN_SUBDIVISIONS: usize = 8;

/// `b_i = int_{edges tagged in tags} q(x, t) phi_i` with composite 3-point Gauss.
pub fn assemble_neumann_load(space: &FeSpace, q: impl Fn(f64, f64) -> f64, t: f64, tags: &[BoundaryTag]) -> Vec<f64> {
    assemble_neumann_load_with(space, q, t, tags, NEUMANN_SUBDIVISIONS)
}

pub fn assemble_neumann_load_with(space: &FeSpace, q: impl Fn(f64, f64) -> f64, t: f64, tags: &[BoundaryTag], subdivisions: usize) -> Vec<f64> {
    let mesh = space.mesh();
    let rule = SegmentRule::gauss3();
    let n = space.n_local();
    let m = subdivisions.max(1);
    let mut b = vec![0.0; space.n_dofs()];
    for (e, (&[va, vb], tag)) in mesh.edges().iter().zip(mesh.edge_tags()).enumerate() {
        if !tags.contains(tag) {
            continue;
        }
        let tri_idx = mesh.edge_triangles()[e].0;
        let tri = mesh.triangle_points(tri_idx);
        let (pa, pb) = (mesh.vertices()[va], mesh.vertices()[vb]);
        let len = pa.distance(pb);
        let dofs = space.cell_dofs(tri_idx);
        for s in 0..m {
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let p = pa.lerp(pb, (s as f64 + x) / m as f64);
                let val = w * len / m as f64 * q(p.x, t);
                let phi = space.basis_values(barycentric(&tri, p));
                for a in 0..n {
                    b[dofs[a]] += val * phi[a];
                }
            }
        }
    }
    b
}

/// Sum of `a * x` into `acc`.
pub fn add_scaled(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, xi) in acc.iter_mut().zip(x) {
        *y += a * xi;
    }
}

/// Checks that a coefficient is positive and finite at the DOF points of `space`
/// falling in `region`.
pub fn check_positive(space: &FeSpace, c: &Coefficient, region: Region) -> Result<()> {
    for &p in space.dof_coords() {
        let inside = match region {
            Region::All => true,
            Region::Inside(r) => r.contains(p, 0.0),
            Region::Outside(r) => !r.contains(p, 0.0),
        };
        if inside {
            let v = c.value(p);
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::error::Error::InvalidConfig(format!("coefficient must be positive, got {v} at ({}, {})", p.x, p.y)));
            }
        }
    }
    Ok(())
}
