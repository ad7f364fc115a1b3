use serde::{Deserialize, Serialize};

use super::{Side, TensorBasis};
use crate::{Error, Result};

/// Point of the geometry map together with its Jacobian.
#[derive(Debug, Clone, Copy)]
pub struct MapEval {
    pub x: [f64; 3],
    /// `jac[a][b] = dx_a / dxi_b`.
    pub jac: [[f64; 3]; 3],
    pub det: f64,
}

impl MapEval {
    /// `J^{-T}`, which maps parametric gradients to physical ones.
    pub fn inverse_transpose(&self, dim: usize) -> [[f64; 3]; 3] {
        let j = &self.jac;
        let mut out = [[0.0; 3]; 3];
        match dim {
            1 => out[0][0] = 1.0 / j[0][0],
            2 => {
                let inv = 1.0 / self.det;
                // (J^{-1})^T
                out[0][0] = j[1][1] * inv;
                out[0][1] = -j[1][0] * inv;
                out[1][0] = -j[0][1] * inv;
                out[1][1] = j[0][0] * inv;
            }
            _ => {
                let inv = 1.0 / self.det;
                // cofactor matrix divided by det is J^{-T}
                out[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) * inv;
                out[0][1] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) * inv;
                out[0][2] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) * inv;
                out[1][0] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) * inv;
                out[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) * inv;
                out[1][2] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) * inv;
                out[2][0] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) * inv;
                out[2][1] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) * inv;
                out[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) * inv;
            }
        }
        out
    }

    /// Physical gradient from a parametric one.
    pub fn push_gradient(inv_t: &[[f64; 3]; 3], g: &[f64; 3], dim: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, o) in out.iter_mut().enumerate().take(dim) {
            *o = (0..dim).map(|b| inv_t[a][b] * g[b]).sum();
        }
        out
    }

    /// Outward unit normal and surface measure factor on a side, from
    /// Nanson's relation `n da = det J J^{-T} N dA`.
    pub fn side_normal(&self, side: Side, dim: usize) -> ([f64; 3], f64) {
        let inv_t = self.inverse_transpose(dim);
        let sign = if side.upper { 1.0 } else { -1.0 };
        let mut n = [0.0; 3];
        for (a, na) in n.iter_mut().enumerate().take(dim) {
            *na = sign * inv_t[a][side.dir];
        }
        let len = n.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in n.iter_mut() {
            *v /= len;
        }
        (n, self.det.abs() * len)
    }
}

pub(crate) fn det(jac: &[[f64; 3]; 3], dim: usize) -> f64 {
    match dim {
        1 => jac[0][0],
        2 => jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
        _ => {
            jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
        }
    }
}

/// B-spline parametrization `G(xi) = sum_i P_i N_i(xi)` of one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryMap {
    basis: TensorBasis,
    control: Vec<[f64; 3]>,
}

impl GeometryMap {
    pub fn new(basis: TensorBasis, control: Vec<[f64; 3]>) -> Result<Self> {
        if control.len() != basis.size() {
            return Err(Error::ShapeMismatch { expected: basis.size(), got: control.len() });
        }
        Ok(Self { basis, control })
    }

    /// Control points at the Greville abscissae of `basis` mapped through
    /// `f`; reproduces `f` exactly whenever it is affine.
    pub fn from_greville(basis: TensorBasis, f: impl Fn(&[f64]) -> [f64; 3]) -> Self {
        let dim = basis.dim();
        let grev: Vec<Vec<f64>> = (0..dim).map(|d| basis.knots(d).greville()).collect();
        let control = basis
            .multi_indices()
            .map(|m| {
                let xi: Vec<f64> = (0..dim).map(|d| grev[d][m[d]]).collect();
                f(&xi)
            })
            .collect();
        Self { basis, control }
    }

    /// Axis-aligned box `[lower, upper]` as a single linear element.
    pub fn affine_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::ShapeMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(upper).any(|(a, b)| b <= a) {
            return Err(Error::InvalidArgument("box must have positive extent".into()));
        }
        let basis = TensorBasis::uniform(lower.len(), 1, 1)?;
        let (lo, hi) = (lower.to_vec(), upper.to_vec());
        Ok(Self::from_greville(basis, move |xi| {
            let mut x = [0.0; 3];
            for d in 0..xi.len() {
                x[d] = lo[d] + xi[d] * (hi[d] - lo[d]);
            }
            x
        }))
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn control(&self) -> &[[f64; 3]] {
        &self.control
    }

    /// Physical point, Jacobian and its determinant at `xi`.
    pub fn eval(&self, xi: &[f64]) -> Result<MapEval> {
        let dim = self.dim();
        let e = self.basis.eval(xi)?;
        let mut x = [0.0; 3];
        let mut jac = [[0.0; 3]; 3];
        for ((&i, &v), g) in e.indices.iter().zip(&e.values).zip(&e.grads) {
            let p = &self.control[i];
            for a in 0..dim {
                x[a] += p[a] * v;
                for b in 0..dim {
                    jac[a][b] += p[a] * g[b];
                }
            }
        }
        let det = det(&jac, dim);
        let scale: f64 = (0..dim).map(|b| (0..dim).map(|a| jac[a][b] * jac[a][b]).sum::<f64>().sqrt()).product();
        if !det.is_finite() || det.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularGeometry { det, point: xi.to_vec() });
        }
        Ok(MapEval { x, jac, det })
    }

    /// Physical image of `xi` without derivative information.
    pub fn point(&self, xi: &[f64]) -> Result<[f64; 3]> {
        let e = self.basis.eval(xi)?;
        let mut x = [0.0; 3];
        for (&i, &v) in e.indices.iter().zip(&e.values) {
            for (a, xa) in x.iter_mut().enumerate().take(self.dim()) {
                *xa += self.control[i][a] * v;
            }
        }
        Ok(x)
    }

    /// Image of the parametric corner selected by one bit per direction.
    pub fn corner(&self, bits: [bool; 3]) -> [f64; 3] {
        // corners of an open knot vector interpolate the control net
        self.control[self.basis.corner_dof(bits)]
    }

    /// All `2^d` corners, bit `d` of the index selecting the upper end in direction `d`.
    pub fn corners(&self) -> Vec<[f64; 3]> {
        let dim = self.dim();
        (0..1usize << dim).map(|c| self.corner([c & 1 != 0, c & 2 != 0, c & 4 != 0])).collect()
    }
}

/// Mesh induced on a patch by the knot vectors of a discretization basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMesh {
    pub breakpoints: Vec<Vec<f64>>,
    /// Largest physical element diameter.
    pub h: f64,
    /// Physical patch diameter.
    pub diameter: f64,
}

impl PatchMesh {
    pub fn new(geometry: &GeometryMap, basis: &TensorBasis) -> Result<Self> {
        let dim = basis.dim();
        if geometry.dim() != dim {
            return Err(Error::ShapeMismatch { expected: geometry.dim(), got: dim });
        }
        let breakpoints: Vec<Vec<f64>> = basis.directions().iter().map(|k| k.breakpoints()).collect();
        let mut h: f64 = 0.0;
        for_each_element(&breakpoints, |lo, hi| {
            let pts: Vec<[f64; 3]> = (0..1usize << dim)
                .map(|c| {
                    let xi: Vec<f64> = (0..dim).map(|d| if c >> d & 1 == 1 { hi[d] } else { lo[d] }).collect();
                    geometry.point(&xi)
                })
                .collect::<Result<_>>()?;
            h = h.max(max_distance(&pts));
            Ok(())
        })?;
        let diameter = max_distance(&geometry.corners());
        Ok(Self { breakpoints, h, diameter })
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints.iter().map(|b| b.len() - 1).product()
    }
}

fn max_distance(pts: &[[f64; 3]]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.max(d2.sqrt());
        }
    }
    best
}

/// Visit every element as `(lower corner, upper corner)` in parameter space.
pub fn for_each_element(breakpoints: &[Vec<f64>], mut f: impl FnMut(&[f64], &[f64]) -> Result<()>) -> Result<()> {
    let dim = breakpoints.len();
    let counts: Vec<usize> = breakpoints.iter().map(|b| b.len() - 1).collect();
    let total: usize = counts.iter().product();
    let mut lo = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    for e in 0..total {
        let mut rest = e;
        for d in 0..dim {
            let k = rest % counts[d];
            rest /= counts[d];
            lo[d] = breakpoints[d][k];
            hi[d] = breakpoints[d][k + 1];
        }
        f(&lo, &hi)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian(g: &GeometryMap, xi: &[f64]) -> [[f64; 3]; 3] {
        let h = 1e-6;
        let dim = g.dim();
        let mut jac = [[0.0; 3]; 3];
        for b in 0..dim {
            let mut p = xi.to_vec();
            let mut m = xi.to_vec();
            p[b] += h;
            m[b] -= h;
            let xp = g.point(&p).unwrap();
            let xm = g.point(&m).unwrap();
            for a in 0..dim {
                jac[a][b] = (xp[a] - xm[a]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn identity_square() {
        let g = GeometryMap::affine_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let e = g.eval(&[0.3, 0.7]).unwrap();
        assert!((e.x[0] - 0.3).abs() < 1e-15 && (e.x[1] - 0.7).abs() < 1e-15);
        assert!((e.jac[0][0] - 1.0).abs() < 1e-15 && e.jac[0][1].abs() < 1e-15);
        assert!((e.det - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_is_exact_for_higher_degree_greville_nets() {
        let basis = TensorBasis::uniform(3, 3, 4).unwrap();
        let g = GeometryMap::from_greville(basis, |xi| [xi[0], xi[1], xi[2]]);
        for xi in [[0.0, 0.0, 0.0], [0.13, 0.77, 0.5], [1.0, 0.25, 0.999]] {
            let e = g.eval(&xi).unwrap();
            for a in 0..3 {
                assert!((e.x[a] - xi[a]).abs() < 1e-14);
            }
            assert!((e.det - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_scaling() {
        let g = GeometryMap::affine_box(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let e = g.eval(&[0.5, 0.5]).unwrap();
        assert!((e.x[0] - 1.0).abs() < 1e-15 && (e.x[1] - 0.5).abs() < 1e-15);
        assert!((e.det - 2.0).abs() < 1e-15);
    }

    #[test]
    fn curved_map_jacobian_matches_finite_differences() {
        // quadratic quarter-annulus-like patch with a perturbed middle point
        let basis = TensorBasis::uniform(2, 2, 1).unwrap();
        let mut ctrl = Vec::new();
        for j in 0..3 {
            let r = 1.0 + 0.5 * j as f64;
            ctrl.push([r, 0.0, 0.0]);
            ctrl.push([r + 0.05, r - 0.1, 0.0]);
            ctrl.push([0.0, r, 0.0]);
        }
        let g = GeometryMap::new(basis, ctrl).unwrap();
        let xi = [0.5, 0.5];
        let e = g.eval(&xi).unwrap();
        let fd = fd_jacobian(&g, &xi);
        for a in 0..2 {
            for b in 0..2 {
                assert!((fd[a][b] - e.jac[a][b]).abs() < 1e-6);
            }
        }
        // J^{-T} really is the inverse transpose
        let it = e.inverse_transpose(2);
        for a in 0..2 {
            for b in 0..2 {
                let s: f64 = (0..2).map(|c| it[c][a] * e.jac[c][b]).sum();
                assert!((s - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let basis = TensorBasis::uniform(2, 1, 1).unwrap();
        let ctrl = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let g = GeometryMap::new(basis, ctrl).unwrap();
        assert!(matches!(g.eval(&[0.5, 0.5]), Err(Error::SingularGeometry { .. })));
    }

    #[test]
    fn side_normals_of_box() {
        let g = GeometryMap::affine_box(&[0.0, 0.0, 0.0], &[2.0, 1.0, 0.5]).unwrap();
        let e = g.eval(&[1.0, 0.3, 0.3]).unwrap();
        let (n, da) = e.side_normal(Side::new(0, true), 3);
        assert!((n[0] - 1.0).abs() < 1e-15);
        assert!((da - 0.5).abs() < 1e-15);
        let (n, da) = e.side_normal(Side::new(2, false), 3);
        assert!((n[2] + 1.0).abs() < 1e-15);
        assert!((da - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mesh_sizes() {
        let g = GeometryMap::affine_box(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        let basis = TensorBasis::uniform(2, 2, 4).unwrap();
        let m = PatchMesh::new(&g, &basis).unwrap();
        assert_eq!(m.num_elements(), 16);
        assert!((m.h - 0.125 * 2f64.sqrt()).abs() < 1e-14);
        assert!((m.diameter - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!(m.h <= m.diameter);
    }
}
