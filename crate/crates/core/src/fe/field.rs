use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{barycentric, Point, LOCATE_TOL};

use super::space::FeSpace;

/// Finite element function: a coefficient vector over an [`FeSpace`].
#[derive(Clone, Debug)]
pub struct Field {
    space: Arc<FeSpace>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(space: Arc<FeSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch { expected: space.n_dofs(), got: values.len() });
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        Self { space, values: vec![0.0; n] }
    }

    pub fn constant(space: Arc<FeSpace>, c: f64) -> Self {
        let n = space.n_dofs();
        Self { space, values: vec![c; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(space: Arc<FeSpace>, f: impl Fn(Point) -> f64) -> Self {
        let values = space.dof_coords().iter().map(|&p| f(p)).collect();
        Self { space, values }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Value inside triangle `t` at barycentric point `bary`.
    pub fn value_in(&self, t: usize, bary: [f64; 3]) -> f64 {
        let phi = self.space.basis_values(bary);
        self.space.cell_dofs(t).iter().zip(phi).map(|(&d, v)| self.values[d] * v).sum()
    }

    pub fn gradient_in(&self, t: usize, bary: [f64; 3]) -> [f64; 2] {
        let grads = self.space.basis_gradients(t, bary);
        let mut g = [0.0; 2];
        for (&d, gk) in self.space.cell_dofs(t).iter().zip(grads) {
            g[0] += self.values[d] * gk[0];
            g[1] += self.values[d] * gk[1];
        }
        g
    }

    pub fn value_at(&self, p: Point) -> Result<f64> {
        let (t, bary) = self.space.mesh().locate_point(p)?;
        Ok(self.value_in(t, bary))
    }

    /// Gradient at `p` evaluated within `side_hint` when given, otherwise
    /// within the triangle chosen by point location.
    pub fn gradient_at(&self, p: Point, side_hint: Option<usize>) -> Result<[f64; 2]> {
        match side_hint {
            None => {
                let (t, bary) = self.space.mesh().locate_point(p)?;
                Ok(self.gradient_in(t, bary))
            }
            Some(t) => {
                let mesh = self.space.mesh();
                if t >= mesh.n_triangles() {
                    return Err(Error::InvalidSideHint { triangle: t, point: p });
                }
                let bary = barycentric(&mesh.triangle_points(t), p);
                // relative slack: barycentrics scale with 1/h
                let tol = LOCATE_TOL.max(1e-12 / mesh.h());
                if bary.iter().any(|&l| l < -tol) {
                    return Err(Error::InvalidSideHint { triangle: t, point: p });
                }
                Ok(self.gradient_in(t, bary))
            }
        }
    }

    /// Nodal interpolation onto `dst`, whose domain must lie inside this
    /// field's mesh rectangle.
    pub fn interpolate(&self, dst: &Arc<FeSpace>) -> Result<Field> {
        let src_rect = self.space.mesh().rect();
        if !src_rect.contains_rect(dst.mesh().rect(), LOCATE_TOL) {
            return Err(Error::NotContained);
        }
        let values = dst.dof_coords().iter().map(|&p| self.value_at(p)).collect::<Result<Vec<_>>>()?;
        Ok(Field { space: Arc::clone(dst), values })
    }

    /// `self <- a * self + b * other` on the same space.
    pub fn axpby(&mut self, a: f64, b: f64, other: &Field) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x = a * *x + b * y;
        }
    }
}

/// Anything that can be evaluated pointwise: FE fields and analytic functions.
pub trait PointEval {
    fn eval(&self, p: Point) -> Result<f64>;
}

impl PointEval for Field {
    fn eval(&self, p: Point) -> Result<f64> {
        self.value_at(p)
    }
}

impl<T: PointEval + ?Sized> PointEval for &T {
    fn eval(&self, p: Point) -> Result<f64> {
        (**self).eval(p)
    }
}

/// Wraps a closure as an exact reference solution.
pub struct AnalyticField<F>(pub F);

impl<F: Fn(Point) -> f64> PointEval for AnalyticField<F> {
    fn eval(&self, p: Point) -> Result<f64> {
        Ok((self.0)(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_rect_mesh, Rect};

    fn space(rect: Rect, nx: usize, ny: usize, degree: usize) -> Arc<FeSpace> {
        FeSpace::new(Arc::new(generate_rect_mesh(rect, nx, ny).unwrap()), degree).unwrap()
    }

    #[test]
    fn constant_field_evaluates_to_constant() {
        let s = space(Rect::unit_square(), 3, 3, 2);
        let f = Field::constant(s, 4.25);
        assert!((f.value_at(Point::new(0.31, 0.77)).unwrap() - 4.25).abs() < 1e-14);
        let g = f.gradient_at(Point::new(0.31, 0.77), None).unwrap();
        assert!(g[0].abs() < 1e-13 && g[1].abs() < 1e-13);
    }

    #[test]
    fn p1_reproduces_x() {
        let s = space(Rect::unit_square(), 4, 4, 1);
        let f = Field::from_fn(s, |p| p.x);
        assert!((f.value_at(Point::new(0.3, 0.7)).unwrap() - 0.3).abs() < 1e-15);
        let g = f.gradient_at(Point::new(0.3, 0.7), None).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-14 && g[1].abs() < 1e-14);
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let s = space(Rect::unit_square(), 4, 4, 2);
        let f = Field::from_fn(Arc::clone(&s), |p| p.x * p.x);
        assert!((f.value_at(Point::new(0.25, 0.5)).unwrap() - 0.0625).abs() < 1e-13);
        let f = Field::from_fn(s, |p| p.x * p.x + p.y * p.y);
        let g = f.gradient_at(Point::new(0.25, 0.5), None).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn side_hint_must_contain_point() {
        let s = space(Rect::unit_square(), 2, 2, 1);
        let f = Field::from_fn(s, |p| p.x + 2.0 * p.y);
        // (0.5, 0.25) lies on the vertical edge between cells 0 and 1
        let p = Point::new(0.5, 0.25);
        assert!(f.gradient_at(p, Some(0)).is_ok());
        assert!(f.gradient_at(p, Some(3)).is_ok());
        assert!(matches!(f.gradient_at(p, Some(7)), Err(Error::InvalidSideHint { .. })));
        assert!(matches!(f.gradient_at(p, Some(70)), Err(Error::InvalidSideHint { .. })));
    }

    #[test]
    fn interpolate_constant_and_linear() {
        let g = space(Rect::unit_square(), 5, 5, 1);
        let l = space(Rect::new(0.0, 0.95, 1.0, 1.0).unwrap(), 13, 2, 1);
        let c = Field::constant(Arc::clone(&g), 3.0).interpolate(&l).unwrap();
        assert!(c.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
        let x = Field::from_fn(g, |p| p.x).interpolate(&l).unwrap();
        for (v, p) in x.values().iter().zip(l.dof_coords()) {
            assert!((v - p.x).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolate_xy_onto_strip_p2() {
        let g = space(Rect::unit_square(), 4, 4, 2);
        let l = space(Rect::new(0.0, 0.95, 1.0, 1.0).unwrap(), 8, 1, 2);
        let f = Field::from_fn(g, |p| p.x * p.y).interpolate(&l).unwrap();
        for (v, p) in f.values().iter().zip(l.dof_coords()) {
            assert!((v - p.x * p.y).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolate_rejects_larger_target() {
        let small = space(Rect::new(0.0, 0.0, 0.5, 0.5).unwrap(), 2, 2, 1);
        let big = space(Rect::unit_square(), 2, 2, 1);
        assert!(matches!(Field::zeros(small).interpolate(&big), Err(Error::NotContained)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_of_unity_and_exact_reproduction(sx in 0.0f64..=1.0, sy in 0.0f64..=1.0, degree in 1usize..=2) {
                let s = space(Rect::new(-0.5, 0.2, 1.5, 1.1).unwrap(), 5, 3, degree);
                let p = Point::new(-0.5 + 2.0 * sx, 0.2 + 0.9 * sy);
                let (_, bary) = s.mesh().locate_point(p).unwrap();
                let phi = s.basis_values(bary);
                prop_assert!((phi[..s.n_local()].iter().sum::<f64>() - 1.0).abs() < 1e-13);

                let poly = |p: Point| if degree == 1 {
                    0.3 - 1.7 * p.x + 2.1 * p.y
                } else {
                    0.3 - 1.7 * p.x + 2.1 * p.y + 0.9 * p.x * p.x - 1.3 * p.x * p.y + 0.4 * p.y * p.y
                };
                let f = Field::from_fn(Arc::clone(&s), poly);
                prop_assert!((f.value_at(p).unwrap() - poly(p)).abs() < 1e-12);
            }

            #[test]
            fn gradient_matches_finite_differences(sx in 0.05f64..0.95, sy in 0.05f64..0.95) {
                let s = space(Rect::unit_square(), 6, 6, 2);
                let f = Field::from_fn(Arc::clone(&s), |p| (2.0 * p.x).sin() * (1.0 + p.y * p.y));
                let p = Point::new(sx, sy);
                let (t, _) = s.mesh().locate_point(p).unwrap();
                // keep the stencil inside one triangle so the FD sees a smooth polynomial
                let inside = |q: Point| {
                    barycentric(&s.mesh().triangle_points(t), q).iter().all(|&l| l > 0.0)
                };
                let h = 1e-6;
                let stencil = [Point::new(sx + h, sy), Point::new(sx - h, sy), Point::new(sx, sy + h), Point::new(sx, sy - h)];
                prop_assume!(stencil.iter().all(|&q| inside(q)));
                let v = |q: Point| {
                    let b = barycentric(&s.mesh().triangle_points(t), q);
                    f.value_in(t, b)
                };
                let fd = [(v(stencil[0]) - v(stencil[1])) / (2.0 * h), (v(stencil[2]) - v(stencil[3])) / (2.0 * h)];
                let g = f.gradient_at(p, Some(t)).unwrap();
                prop_assert!((g[0] - fd[0]).abs() < 1e-5 && (g[1] - fd[1]).abs() < 1e-5);
            }
        }
    }
}
