//! Univariate and tensor-product B-splines, geometry maps and patch meshes.

mod geometry;
mod knots;
mod quadrature;
mod tensor;

pub use geometry::{for_each_element, GeometryMap, MapEval, PatchMesh};
pub use knots::KnotVector;
pub use quadrature::{gauss_legendre, gauss_on};
pub use tensor::{BasisEval, Side, TensorBasis};
