//! Quadrature rules on the reference triangle (barycentric points) and on
//! the unit interval.

/// Symmetric rule on a triangle; weights sum to one and are scaled by the
/// triangle area at use.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub order: usize,
}

impl TriangleRule {
    /// Three interior points, exact for quadratics.
    pub fn order2() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        Self { points: vec![[a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 3.0; 3], order: 2 }
    }

    /// Six-point Dunavant rule, exact for quartics.
    #[allow(clippy::excessive_precision)]
    pub fn order4() -> Self {
        let a1 = 0.445_948_490_915_964_886;
        let b1 = 1.0 - 2.0 * a1;
        let a2 = 0.091_576_213_509_770_743;
        let b2 = 1.0 - 2.0 * a2;
        let w1 = 0.223_381_589_678_011_466;
        let w2 = 0.109_951_743_655_321_868;
        Self {
            points: vec![[b1, a1, a1], [a1, b1, a1], [a1, a1, b1], [b2, a2, a2], [a2, b2, a2], [a2, a2, b2]],
            weights: vec![w1, w1, w1, w2, w2, w2],
            order: 4,
        }
    }

    /// Default rule for element matrices of the given polynomial degree.
    pub fn for_degree(degree: usize) -> Self {
        if degree <= 1 {
            Self::order2()
        } else {
            Self::order4()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Three-point Gauss–Legendre rule on `[0, 1]`, exact for quintics.
#[derive(Clone, Copy, Debug)]
pub struct SegmentRule {
    pub points: [f64; 3],
    pub weights: [f64; 3],
}

impl SegmentRule {
    pub fn gauss3() -> Self {
        let d = 0.5 * (0.6f64).sqrt();
        Self { points: [0.5 - d, 0.5, 0.5 + d], weights: [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0] }
    }
}

impl Default for SegmentRule {
    fn default() -> Self {
        Self::gauss3()
    }
}
