//! Cross-mesh L2 errors and point probes.

use crate::assembly::{clipped_quadrature, map_point};
use crate::error::{Error, Result};
use crate::fe::{Field, PointEval, TriangleRule};
use crate::geometry::{barycentric, signed_area, Point, LOCATE_TOL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub relative_l2: f64,
    pub absolute_l2: f64,
    pub reference_norm: f64,
    pub n_quad_points: usize,
}

impl ErrorReport {
    fn from_sums(err2: f64, ref2: f64, n: usize) -> Self {
        let absolute_l2 = err2.max(0.0).sqrt();
        let reference_norm = ref2.max(0.0).sqrt();
        let relative_l2 = if reference_norm > 0.0 { absolute_l2 / reference_norm } else { absolute_l2 };
        Self { relative_l2, absolute_l2, reference_norm, n_quad_points: n }
    }
}

/// Splits a triangle into `s * s` congruent sub-triangles.
pub fn subdivide(tri: &[Point; 3], s: usize) -> Vec<[Point; 3]> {
    let s = s.max(1);
    let at = |i: usize, j: usize| {
        let (a, b) = (i as f64 / s as f64, j as f64 / s as f64);
        map_point(tri, [1.0 - a - b, a, b])
    };
    let mut out = Vec::with_capacity(s * s);
    for j in 0..s {
        for i in 0..s - j {
            out.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
            if i + j + 1 < s {
                out.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
    }
    out
}

/// Relative L2 error of `test` against `reference`, integrated with the
/// order-4 rule on the test mesh.
pub fn relative_l2_error(test: &Field, reference: &dyn PointEval) -> Result<ErrorReport> {
    relative_l2_error_refined(test, reference, 1)
}

/// As [`relative_l2_error`] with each test triangle split into
/// `subdivisions^2` pieces, for references with features below the test mesh size.
pub fn relative_l2_error_refined(test: &Field, reference: &dyn PointEval, subdivisions: usize) -> Result<ErrorReport> {
    let mesh = test.space().mesh();
    let rule = TriangleRule::order4();
    let (mut e2, mut r2, mut n) = (0.0, 0.0, 0);
    for t in 0..mesh.n_triangles() {
        let parent = mesh.triangle_points(t);
        for sub in subdivide(&parent, subdivisions) {
            let area = signed_area(&sub);
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let p = map_point(&sub, *b);
                let r = reference.eval(p)?;
                let d = test.value_in(t, barycentric(&parent, p)) - r;
                e2 += w * area * d * d;
                r2 += w * area * r * r;
                n += 1;
            }
        }
    }
    Ok(ErrorReport::from_sums(e2, r2, n))
}

/// Sub-triangle count per side that brings a test cell of size `test_h`
/// down to the reference size.
pub fn subdivisions_for(test_h: f64, reference_h: f64) -> usize {
    ((test_h / reference_h) - 1e-9).ceil().max(1.0) as usize
}

/// Relative L2 error of a two-level pair: the local field on the subregion
/// and the global field on its complement. Each mesh gets its own
/// subdivision count.
pub fn composite_relative_l2_error(
    global: &Field,
    local: &Field,
    reference: &dyn PointEval,
    global_subdivisions: usize,
    local_subdivisions: usize,
) -> Result<ErrorReport> {
    let omega_minus = *local.space().mesh().rect();
    if !global.space().mesh().rect().contains_rect(&omega_minus, LOCATE_TOL) {
        return Err(Error::NotContained);
    }
    let rule = TriangleRule::order4();
    let (mut e2, mut r2, mut n) = (0.0, 0.0, 0);
    let gmesh = global.space().mesh();
    for t in 0..gmesh.n_triangles() {
        let parent = gmesh.triangle_points(t);
        for sub in subdivide(&parent, global_subdivisions) {
            let area = signed_area(&sub);
            let mut acc = |p: Point, w: f64, sign: f64| -> Result<()> {
                let r = reference.eval(p)?;
                let d = global.value_in(t, barycentric(&parent, p)) - r;
                e2 += sign * w * d * d;
                r2 += sign * w * r * r;
                n += 1;
                Ok(())
            };
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                acc(map_point(&sub, *b), w * area, 1.0)?;
            }
            for (b, w) in clipped_quadrature(&sub, &omega_minus, &rule) {
                acc(map_point(&sub, b), w, -1.0)?;
            }
        }
    }
    let lmesh = local.space().mesh();
    for t in 0..lmesh.n_triangles() {
        let parent = lmesh.triangle_points(t);
        for sub in subdivide(&parent, local_subdivisions) {
            let area = signed_area(&sub);
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let p = map_point(&sub, *b);
                let r = reference.eval(p)?;
                let d = local.value_in(t, barycentric(&parent, p)) - r;
                e2 += w * area * d * d;
                r2 += w * area * r * r;
                n += 1;
            }
        }
    }
    Ok(ErrorReport::from_sums(e2, r2, n))
}

/// Two-level pair seen as one function: the local field on the closed
/// subregion, the global field elsewhere.
#[derive(Clone, Copy, Debug)]
pub struct CompositeField<'a> {
    pub global: &'a Field,
    pub local: &'a Field,
}

impl PointEval for CompositeField<'_> {
    fn eval(&self, p: Point) -> Result<f64> {
        if self.local.space().mesh().rect().contains(p, LOCATE_TOL) {
            self.local.value_at(p)
        } else {
            self.global.value_at(p)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRow {
    pub t: f64,
    pub point_id: usize,
    pub value: f64,
}

/// Evaluates every `(t, field)` at every point.
pub fn probe_timeseries<F: PointEval>(fields: &[(f64, F)], points: &[Point]) -> Result<Vec<ProbeRow>> {
    let mut rows = Vec::with_capacity(fields.len() * points.len());
    for (t, f) in fields {
        for (id, &p) in points.iter().enumerate() {
            rows.push(ProbeRow { t: *t, point_id: id, value: f.eval(p)? });
        }
    }
    Ok(rows)
}
