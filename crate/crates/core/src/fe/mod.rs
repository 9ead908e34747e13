//! Lagrange P1/P2 spaces, fields and quadrature.

mod field;
pub mod quadrature;
mod space;

pub use field::{AnalyticField, Field, PointEval};
pub use quadrature::{SegmentRule, TriangleRule};
pub use space::{barycentric_gradients, basis_gradients, basis_values, FeSpace, MAX_LOCAL_DOFS};
