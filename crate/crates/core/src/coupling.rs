//! Cross-mesh terms of the two-level method: traces on the interface,
//! the interface jump load and the subregion volume coupling loads.

use std::sync::Arc;

use crate::assembly::{map_point, MaterialModel};
use crate::error::{Error, Result};
use crate::fe::{FeSpace, Field, SegmentRule, TriangleRule, MAX_LOCAL_DOFS};
use crate::geometry::{barycentric, signed_area, GammaClass, GammaPolyline, Mesh, Point, Side};

/// Quadrature point on the interface with its location in both meshes.
#[derive(Clone, Debug)]
pub struct GammaPoint {
    pub point: Point,
    pub weight: f64,
    /// Unit normal pointing out of the subregion.
    pub normal: [f64; 2],
    pub class: GammaClass,
    pub global_triangle: usize,
    pub global_bary: [f64; 3],
    /// Local triangle on the subregion side of the interface.
    pub local_triangle: usize,
    pub local_bary: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubSegment {
    pub side: Side,
    pub start: Point,
    pub end: Point,
    pub class: GammaClass,
}

impl SubSegment {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }
}

/// Interface quadrature on the common refinement of both meshes' breakpoints.
#[derive(Clone, Debug)]
pub struct GammaQuadrature {
    global: Arc<FeSpace>,
    local: Arc<FeSpace>,
    subsegments: Vec<SubSegment>,
    points: Vec<GammaPoint>,
}

impl GammaQuadrature {
    pub fn global_space(&self) -> &Arc<FeSpace> {
        &self.global
    }

    pub fn local_space(&self) -> &Arc<FeSpace> {
        &self.local
    }

    pub fn subsegments(&self) -> &[SubSegment] {
        &self.subsegments
    }

    pub fn points(&self) -> &[GammaPoint] {
        &self.points
    }

    pub fn total_length(&self) -> f64 {
        self.subsegments.iter().map(SubSegment::length).sum()
    }
}

/// Parameters in `[0, 1]` where segment `a`-`b` enters or leaves triangles of `mesh`.
fn segment_breakpoints(mesh: &Mesh, a: Point, b: Point, out: &mut Vec<f64>) {
    const EPS: f64 = 1e-12;
    let (xmin, xmax) = (a.x.min(b.x), a.x.max(b.x));
    let (ymin, ymax) = (a.y.min(b.y), a.y.max(b.y));
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle_points(t);
        let tx = tri.iter().map(|p| p.x);
        let ty = tri.iter().map(|p| p.y);
        if tx.clone().fold(f64::INFINITY, f64::min) > xmax + EPS
            || tx.fold(f64::NEG_INFINITY, f64::max) < xmin - EPS
            || ty.clone().fold(f64::INFINITY, f64::min) > ymax + EPS
            || ty.fold(f64::NEG_INFINITY, f64::max) < ymin - EPS
        {
            continue;
        }
        let la = barycentric(&tri, a);
        let lb = barycentric(&tri, b);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for k in 0..3 {
            // la + s (lb - la) >= 0
            let d = lb[k] - la[k];
            if d.abs() < 1e-14 {
                if la[k] < -EPS {
                    hi = -1.0;
                }
            } else if d > 0.0 {
                lo = lo.max(-la[k] / d);
            } else {
                hi = hi.min(-la[k] / d);
            }
        }
        if hi >= lo - EPS {
            out.push(lo.clamp(0.0, 1.0));
            out.push(hi.clamp(0.0, 1.0));
        }
    }
}

/// Builds the interface quadrature for `gamma` between a global and a local space.
pub fn build_gamma_quadrature(global: &Arc<FeSpace>, local: &Arc<FeSpace>, gamma: &GammaPolyline) -> Result<GammaQuadrature> {
    let gmesh = global.mesh();
    let lmesh = local.mesh();
    let lr = lmesh.rect();
    let gr = gamma.rect();
    let tol = 1e-12 * gr.width().max(gr.height()).max(1.0);
    if (lr.x0 - gr.x0).abs() > tol || (lr.x1 - gr.x1).abs() > tol || (lr.y0 - gr.y0).abs() > tol || (lr.y1 - gr.y1).abs() > tol {
        return Err(Error::InvalidConfig("local mesh does not tile the subregion".into()));
    }
    let rule = SegmentRule::gauss3();
    let offset = 1e-10 * lmesh.h();
    let mut subsegments = Vec::new();
    let mut points = Vec::new();
    for seg in gamma.segments() {
        let (a, b) = (seg.start, seg.end);
        let len = seg.length();
        let mut s = vec![0.0, 1.0];
        segment_breakpoints(gmesh, a, b, &mut s);
        segment_breakpoints(lmesh, a, b, &mut s);
        s.sort_by(f64::total_cmp);
        s.dedup_by(|x, y| (*x - *y).abs() * len <= tol);
        // keep the exact endpoint after merging
        *s.last_mut().expect("non-empty") = 1.0;
        for w in s.windows(2) {
            let (pa, pb) = (a.lerp(b, w[0]), a.lerp(b, w[1]));
            subsegments.push(SubSegment { side: seg.side, start: pa, end: pb, class: seg.class });
            let sub_len = pa.distance(pb);
            for (x, wq) in rule.points.iter().zip(&rule.weights) {
                let p = pa.lerp(pb, *x);
                let (gt, gb) = gmesh.locate_point(p)?;
                let (lt, _) = lmesh.locate_point(p.offset(seg.normal, -offset))?;
                let lb = barycentric(&lmesh.triangle_points(lt), p);
                points.push(GammaPoint {
                    point: p,
                    weight: wq * sub_len,
                    normal: seg.normal,
                    class: seg.class,
                    global_triangle: gt,
                    global_bary: gb,
                    local_triangle: lt,
                    local_bary: lb,
                });
            }
        }
    }
    Ok(GammaQuadrature { global: Arc::clone(global), local: Arc::clone(local), subsegments, points })
}

/// Local boundary DOFs on the interface and the global field's values there.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

/// Nodal transfer of `global` onto every boundary DOF of the local space.
pub fn extract_trace_dirichlet(global: &Field, local: &FeSpace) -> Result<Trace> {
    let dofs = local.all_boundary_dofs();
    let values = dofs.iter().map(|&d| global.value_at(local.dof_coords()[d])).collect::<Result<Vec<_>>>()?;
    Ok(Trace { dofs, values })
}

/// `b_i = sum over interface points of w * density(point) * phi_i`.
pub fn assemble_gamma_density_load(gq: &GammaQuadrature, density: impl Fn(&GammaPoint) -> f64) -> Vec<f64> {
    let space = &gq.global;
    let n = space.n_local();
    let mut b = vec![0.0; space.n_dofs()];
    for gp in &gq.points {
        let val = gp.weight * density(gp);
        if val == 0.0 {
            continue;
        }
        let phi = space.basis_values(gp.global_bary);
        for (a, &d) in space.cell_dofs(gp.global_triangle).iter().enumerate().take(n) {
            b[d] += val * phi[a];
        }
    }
    b
}

/// Interface jump load `int_gamma (beta_plus - beta_minus) d(u_tilde)/dn v`
/// with the normal derivative taken from the local side. Segments on the
/// Dirichlet boundary are skipped.
pub fn assemble_delta_jump_load(gq: &GammaQuadrature, local_field: &Field, material: &MaterialModel) -> Result<Vec<f64>> {
    check_space(local_field, &gq.local)?;
    Ok(assemble_gamma_density_load(gq, |gp| {
        if gp.class == GammaClass::OnDirichletBoundary {
            return 0.0;
        }
        let jump = material.beta_plus.value(gp.point) - material.beta_minus.value(gp.point);
        if jump == 0.0 {
            return 0.0;
        }
        let g = local_field.gradient_in(gp.local_triangle, gp.local_bary);
        jump * (g[0] * gp.normal[0] + g[1] * gp.normal[1])
    }))
}

fn check_space(field: &Field, space: &Arc<FeSpace>) -> Result<()> {
    if !Arc::ptr_eq(field.space(), space) {
        return Err(Error::DimensionMismatch { expected: space.n_dofs(), got: field.values().len() });
    }
    Ok(())
}

/// Quadrature point of the subregion, taken on the local mesh and located in
/// the global mesh.
#[derive(Clone, Debug)]
pub struct VolumePoint {
    pub point: Point,
    pub weight: f64,
    pub local_triangle: usize,
    pub local_bary: [f64; 3],
    pub global_triangle: usize,
    pub global_bary: [f64; 3],
}

/// Subregion quadrature: local triangles with global point location.
#[derive(Clone, Debug)]
pub struct OmegaMinusQuadrature {
    global: Arc<FeSpace>,
    local: Arc<FeSpace>,
    points: Vec<VolumePoint>,
}

impl OmegaMinusQuadrature {
    pub fn new(global: &Arc<FeSpace>, local: &Arc<FeSpace>) -> Result<Self> {
        let gmesh = global.mesh();
        let lmesh = local.mesh();
        if !gmesh.rect().contains_rect(lmesh.rect(), crate::geometry::LOCATE_TOL) {
            return Err(Error::NotContained);
        }
        let rule = TriangleRule::for_degree(global.degree().max(local.degree()));
        let mut points = Vec::with_capacity(lmesh.n_triangles() * rule.len());
        for t in 0..lmesh.n_triangles() {
            let tri = lmesh.triangle_points(t);
            let area = signed_area(&tri);
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let p = map_point(&tri, *bary);
                let (gt, gb) = gmesh.locate_point(p)?;
                points.push(VolumePoint { point: p, weight: w * area, local_triangle: t, local_bary: *bary, global_triangle: gt, global_bary: gb });
            }
        }
        Ok(Self { global: Arc::clone(global), local: Arc::clone(local), points })
    }

    pub fn points(&self) -> &[VolumePoint] {
        &self.points
    }

    pub fn global_space(&self) -> &Arc<FeSpace> {
        &self.global
    }

    pub fn local_space(&self) -> &Arc<FeSpace> {
        &self.local
    }

    /// `b_i = int_{Omega-} g phi_i` against the global basis.
    pub fn load(&self, g: impl Fn(&VolumePoint) -> f64) -> Vec<f64> {
        let space = &self.global;
        let n = space.n_local();
        let mut b = vec![0.0; space.n_dofs()];
        for vp in &self.points {
            let val = vp.weight * g(vp);
            if val == 0.0 {
                continue;
            }
            let phi: [f64; MAX_LOCAL_DOFS] = space.basis_values(vp.global_bary);
            for (a, &d) in space.cell_dofs(vp.global_triangle).iter().enumerate().take(n) {
                b[d] += val * phi[a];
            }
        }
        b
    }
}

/// `(rho_plus - rho_minus beta_plus / beta_minus) / dt * int_{Omega-} (u_tilde - u_prev) v`.
pub fn assemble_unsteady_volumetric_coupling(
    omq: &OmegaMinusQuadrature,
    local_tilde: &Field,
    global_prev: &Field,
    material: &MaterialModel,
    dt: f64,
) -> Result<Vec<f64>> {
    check_space(local_tilde, &omq.local)?;
    check_space(global_prev, &omq.global)?;
    Ok(omq.load(|vp| {
        let c = material.capacity_coupling(vp.point);
        if c == 0.0 {
            return 0.0;
        }
        let ut = local_tilde.value_in(vp.local_triangle, vp.local_bary);
        let up = global_prev.value_in(vp.global_triangle, vp.global_bary);
        c * (ut - up) / dt
    }))
}

/// `int_{Omega-} [(beta_plus / beta_minus) grad(u_tilde) . grad(beta_minus)
/// - grad(u_tilde) . grad(beta_plus)] v`; zero for constant conductivities.
pub fn assemble_variable_coeff_coupling(omq: &OmegaMinusQuadrature, local_tilde: &Field, material: &MaterialModel) -> Result<Vec<f64>> {
    check_space(local_tilde, &omq.local)?;
    if !material.has_variable_conductivity() {
        return Ok(vec![0.0; omq.global.n_dofs()]);
    }
    Ok(omq.load(|vp| {
        let g = local_tilde.gradient_in(vp.local_triangle, vp.local_bary);
        let gm = material.beta_minus.gradient(vp.point);
        let gp = material.beta_plus.gradient(vp.point);
        let ratio = material.beta_ratio(vp.point);
        ratio * (g[0] * gm[0] + g[1] * gm[1]) - (g[0] * gp[0] + g[1] * gp[1])
    }))
}
