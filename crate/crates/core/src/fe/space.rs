use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Mesh, Point};

/// Continuous Lagrange space of degree 1 or 2 over a [`Mesh`].
///
/// Degrees of freedom are numbered vertices first; for P2 the midpoint of
/// mesh edge `e` follows as `n_vertices + e`. Per-triangle DOFs are ordered
/// `[v0, v1, v2]` for P1 and `[v0, v1, v2, m01, m12, m20]` for P2.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    dof_coords: Vec<Point>,
    cell_dofs: Vec<usize>,
    boundary_dofs: BTreeMap<BoundaryTag, Vec<usize>>,
}

pub const MAX_LOCAL_DOFS: usize = 6;

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Arc<Self>> {
        if degree != 1 && degree != 2 {
            return Err(Error::UnsupportedDegree(degree));
        }
        let nv = mesh.n_vertices();
        let mut dof_coords = mesh.vertices().to_vec();
        if degree == 2 {
            dof_coords.extend(mesh.edges().iter().map(|&[a, b]| {
                let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                Point::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y))
            }));
        }
        let n_local = local_dofs(degree);
        let mut cell_dofs = Vec::with_capacity(n_local * mesh.n_triangles());
        for (tri, edges) in mesh.triangles().iter().zip(mesh.triangle_edges()) {
            cell_dofs.extend_from_slice(tri);
            if degree == 2 {
                cell_dofs.extend(edges.iter().map(|e| nv + e));
            }
        }
        let mut boundary_dofs: BTreeMap<BoundaryTag, Vec<usize>> = BTreeMap::new();
        for (e, (&[a, b], &tag)) in mesh.edges().iter().zip(mesh.edge_tags()).enumerate() {
            if tag == BoundaryTag::Interior {
                continue;
            }
            let list = boundary_dofs.entry(tag).or_default();
            list.extend([a, b]);
            if degree == 2 {
                list.push(nv + e);
            }
        }
        for list in boundary_dofs.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Arc::new(Self { mesh, degree, dof_coords, cell_dofs, boundary_dofs }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn n_local(&self) -> usize {
        local_dofs(self.degree)
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.n_local();
        &self.cell_dofs[n * t..n * (t + 1)]
    }

    /// DOFs lying on edges carrying `tag` (sorted, possibly empty).
    pub fn boundary_dofs(&self, tag: BoundaryTag) -> &[usize] {
        self.boundary_dofs.get(&tag).map_or(&[], Vec::as_slice)
    }

    /// Sorted union of the DOFs on every tagged boundary edge.
    pub fn all_boundary_dofs(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.boundary_dofs.values().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Gradients of the barycentric coordinates of triangle `t`.
    pub fn grad_lambda(&self, t: usize) -> [[f64; 2]; 3] {
        barycentric_gradients(&self.mesh.triangle_points(t))
    }

    /// Basis values at barycentric point `bary`; the first `n_local` entries are used.
    pub fn basis_values(&self, bary: [f64; 3]) -> [f64; MAX_LOCAL_DOFS] {
        basis_values(self.degree, bary)
    }

    pub fn basis_gradients(&self, t: usize, bary: [f64; 3]) -> [[f64; 2]; MAX_LOCAL_DOFS] {
        basis_gradients(self.degree, bary, &self.grad_lambda(t))
    }
}

fn local_dofs(degree: usize) -> usize {
    if degree == 1 {
        3
    } else {
        6
    }
}

pub fn barycentric_gradients(tri: &[Point; 3]) -> [[f64; 2]; 3] {
    let [a, b, c] = tri;
    let det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    [[(b.y - c.y) / det, (c.x - b.x) / det], [(c.y - a.y) / det, (a.x - c.x) / det], [(a.y - b.y) / det, (b.x - a.x) / det]]
}

pub fn basis_values(degree: usize, l: [f64; 3]) -> [f64; MAX_LOCAL_DOFS] {
    if degree == 1 {
        [l[0], l[1], l[2], 0.0, 0.0, 0.0]
    } else {
        [l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), l[2] * (2.0 * l[2] - 1.0), 4.0 * l[0] * l[1], 4.0 * l[1] * l[2], 4.0 * l[2] * l[0]]
    }
}

pub fn basis_gradients(degree: usize, l: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; MAX_LOCAL_DOFS] {
    let mut out = [[0.0; 2]; MAX_LOCAL_DOFS];
    if degree == 1 {
        out[..3].copy_from_slice(gl);
        return out;
    }
    for k in 0..3 {
        let s = 4.0 * l[k] - 1.0;
        out[k] = [s * gl[k][0], s * gl[k][1]];
    }
    for (slot, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        out[3 + slot] = [4.0 * (l[i] * gl[j][0] + l[j] * gl[i][0]), 4.0 * (l[i] * gl[j][1] + l[j] * gl[i][1])];
    }
    out
}
