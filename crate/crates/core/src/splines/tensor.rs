use serde::{Deserialize, Serialize};

use super::KnotVector;
use crate::{Error, Result};

/// A side of the parameter cube: the facet `xi[dir] = 0` or `xi[dir] = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Side {
    pub dir: usize,
    pub upper: bool,
}

impl Side {
    pub fn new(dir: usize, upper: bool) -> Self {
        Self { dir, upper }
    }

    pub fn all(dim: usize) -> impl Iterator<Item = Side> {
        (0..dim).flat_map(|d| [Side::new(d, false), Side::new(d, true)])
    }

    /// Parametric directions spanning the side, ascending.
    pub fn tangential(&self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|&d| d != self.dir).collect()
    }

    pub fn coordinate(&self) -> f64 {
        if self.upper {
            1.0
        } else {
            0.0
        }
    }

    pub fn index(&self) -> usize {
        2 * self.dir + usize::from(self.upper)
    }
}

/// Active basis functions of a tensor-product space at one parametric point.
#[derive(Debug, Clone, Default)]
pub struct BasisEval {
    /// Flat indices of the active functions.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Parametric gradients; unused trailing components are zero.
    pub grads: Vec<[f64; 3]>,
}

/// Tensor-product B-spline space on `[0, 1]^d`.
///
/// Multi-indices are enumerated lexicographically with the first direction
/// running fastest: `flat = i0 + M0 * (i1 + M1 * i2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBasis {
    dirs: Vec<KnotVector>,
}

impl TensorBasis {
    pub fn new(dirs: Vec<KnotVector>) -> Result<Self> {
        if !(1..=3).contains(&dirs.len()) {
            return Err(Error::InvalidArgument(format!("tensor basis of dimension {}", dirs.len())));
        }
        Ok(Self { dirs })
    }

    pub fn uniform(dim: usize, degree: usize, elements: usize) -> Result<Self> {
        Self::new((0..dim).map(|_| KnotVector::uniform(degree, elements)).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn knots(&self, dir: usize) -> &KnotVector {
        &self.dirs[dir]
    }

    pub fn directions(&self) -> &[KnotVector] {
        &self.dirs
    }

    pub fn max_degree(&self) -> usize {
        self.dirs.iter().map(KnotVector::degree).max().unwrap_or(0)
    }

    /// Basis size per direction; unused directions report 1.
    pub fn sizes(&self) -> [usize; 3] {
        let mut s = [1; 3];
        for (d, kv) in self.dirs.iter().enumerate() {
            s[d] = kv.num_basis();
        }
        s
    }

    pub fn size(&self) -> usize {
        self.dirs.iter().map(KnotVector::num_basis).product()
    }

    pub fn flat(&self, idx: [usize; 3]) -> usize {
        let s = self.sizes();
        idx[0] + s[0] * (idx[1] + s[1] * idx[2])
    }

    pub fn multi(&self, flat: usize) -> [usize; 3] {
        let s = self.sizes();
        [flat % s[0], (flat / s[0]) % s[1], flat / (s[0] * s[1])]
    }

    pub fn multi_indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.size()).map(|f| self.multi(f))
    }

    pub fn refined(&self) -> Self {
        Self { dirs: self.dirs.iter().map(KnotVector::refined).collect() }
    }

    /// Number of elements per direction.
    pub fn elements(&self) -> Vec<usize> {
        self.dirs.iter().map(KnotVector::num_elements).collect()
    }

    /// Values and parametric gradients of all functions active at `xi`.
    pub fn eval(&self, xi: &[f64]) -> Result<BasisEval> {
        let dim = self.dim();
        if xi.len() != dim {
            return Err(Error::ShapeMismatch { expected: dim, got: xi.len() });
        }
        let mut firsts = [0usize; 3];
        let mut vals: [Vec<f64>; 3] = [vec![1.0], vec![1.0], vec![1.0]];
        let mut ders: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        for d in 0..dim {
            let (first, mut dd) = self.dirs[d].eval_basis_ders(xi[d], 1)?;
            firsts[d] = first;
            ders[d] = dd.pop().unwrap_or_default();
            vals[d] = dd.pop().unwrap_or_default();
        }
        let n = vals[0].len() * vals[1].len() * vals[2].len();
        let mut out = BasisEval { indices: Vec::with_capacity(n), values: Vec::with_capacity(n), grads: Vec::with_capacity(n) };
        for k in 0..vals[2].len() {
            for j in 0..vals[1].len() {
                for i in 0..vals[0].len() {
                    let v = [vals[0][i], vals[1][j], vals[2][k]];
                    let dv = [ders[0][i], ders[1][j], ders[2][k]];
                    out.indices.push(self.flat([firsts[0] + i, firsts[1] + j, firsts[2] + k]));
                    out.values.push(v[0] * v[1] * v[2]);
                    let mut g = [0.0; 3];
                    g[0] = dv[0] * v[1] * v[2];
                    if dim > 1 {
                        g[1] = v[0] * dv[1] * v[2];
                    }
                    if dim > 2 {
                        g[2] = v[0] * v[1] * dv[2];
                    }
                    out.grads.push(g);
                }
            }
        }
        Ok(out)
    }

    /// Flat indices of the functions whose trace on `side` is nonzero, in
    /// lexicographic order of the tangential indices.
    pub fn side_dofs(&self, side: Side) -> Vec<usize> {
        let s = self.sizes();
        let fixed = if side.upper { s[side.dir] - 1 } else { 0 };
        self.multi_indices().filter(|m| m[side.dir] == fixed).map(|m| self.flat(m)).collect()
    }

    /// The flat index of the function interpolating the corner given by one
    /// bit per direction.
    pub fn corner_dof(&self, corner: [bool; 3]) -> usize {
        let s = self.sizes();
        let mut m = [0; 3];
        for d in 0..self.dim() {
            m[d] = if corner[d] { s[d] - 1 } else { 0 };
        }
        self.flat(m)
    }
}
