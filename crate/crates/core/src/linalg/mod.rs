//! Sparse storage, direct factorizations and preconditioned CG.

mod dense;
mod ldlt;
mod lu;
mod ordering;
mod pcg;
mod schur;
mod sparse;

pub use dense::DenseMatrix;
pub use ldlt::LdltFactor;
pub use lu::LuFactor;
pub use ordering::{inverse_permutation, minimum_degree};
pub use pcg::{dot, lanczos_extremes, pcg, tridiagonal_extremes, Euclidean, KrylovVector, PcgOptions, PcgReport, ScalarProduct};
pub use schur::{apply_schur, schur_rhs};
pub use sparse::{SparseMatrix, TripletBuilder};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Spd,
    SymmetricIndefinite,
}

/// Factors of a square, structurally symmetric sparse matrix.
#[derive(Debug, Clone)]
pub enum Factorization {
    Ldlt(LdltFactor),
    Lu(LuFactor),
}

/// SPD matrices get a sparse `L D L^T`; symmetric indefinite (saddle point)
/// matrices get a sparse LU with threshold partial pivoting on top of the
/// same symmetric fill-reducing ordering.
pub fn factorize(a: &SparseMatrix, kind: FactorKind) -> Result<Factorization> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch { expected: a.nrows(), got: a.ncols() });
    }
    if !a.is_structurally_symmetric() {
        return Err(Error::InvalidArgument("factorize expects a structurally symmetric matrix".into()));
    }
    Ok(match kind {
        FactorKind::Spd => Factorization::Ldlt(LdltFactor::new(a, true)?),
        FactorKind::SymmetricIndefinite => Factorization::Lu(LuFactor::new(a)?),
    })
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        match self {
            Factorization::Ldlt(_) => FactorKind::Spd,
            Factorization::Lu(_) => FactorKind::SymmetricIndefinite,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Factorization::Ldlt(f) => f.dim(),
            Factorization::Lu(f) => f.dim(),
        }
    }

    pub fn nnz_factor(&self) -> usize {
        match self {
            Factorization::Ldlt(f) => f.nnz_factor(),
            Factorization::Lu(f) => f.nnz_factor(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factorization::Ldlt(f) => f.solve(b),
            Factorization::Lu(f) => f.solve(b),
        }
    }

    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rhs.iter().map(|b| self.solve(b)).collect()
    }
}
