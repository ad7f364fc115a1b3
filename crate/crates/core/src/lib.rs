//! Dual-primal isogeometric tearing and interconnecting (IETI-DP) solvers for
//! second-order elliptic problems on multipatch B-spline domains.
//!
//! Both the conforming (cG) and the symmetric interior penalty discontinuous
//! Galerkin (dG) coupling across patch interfaces are supported. The solver
//! runs on an in-process message-passing runtime in which every worker owns
//! a set of patches and communicates only through typed channels, mirroring a
//! distributed-memory MPI code.
//!
//! Layout:
//!
//! * [`splines`]: knot vectors, tensor-product bases, geometry maps, quadrature.
//! * [`assembly`]: multipatch topology, dof maps, cG/dG patch assembly, jump operators.
//! * [`linalg`]: sparse storage, direct factorizations, PCG with Lanczos estimates.
//! * [`ieti`]: primal constraints, energy-minimizing primal basis, coarse problem,
//!   the system operator `F` and the scaled Dirichlet preconditioner.
//! * [`runtime`]: worker groups, accumulated/distributed vectors, collectives,
//!   parallel PCG and the distributed solve.
//! * [`harness`]: model problems, error norms, scaling studies and reports.

// `!(x > 0.0)` rejects NaN as well; indexed loops mirror the formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod error;
pub mod harness;
pub mod ieti;
pub mod linalg;
pub mod runtime;
pub mod splines;

pub use error::{Error, Result};
