use serde::{Deserialize, Serialize};

use crate::assembly::{Discretization, Formulation, Problem};
use crate::runtime::PatchResult;
use crate::splines::{for_each_element, GeometryMap, MapEval};
use crate::{Error, Result};

use super::problems::Manufactured;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    /// `sqrt(sum_k alpha ||grad(u - u_h)||^2)` over patches.
    pub h1_semi: f64,
    /// Broken energy norm including the interface penalty (dG only).
    pub dg: Option<f64>,
}

/// Errors of the patchwise solution against the exact solution, by Gauss
/// quadrature with `points` nodes per direction and element (default `p + 3`).
pub fn error_norms(
    disc: &Discretization,
    geometries: &[GeometryMap],
    patches: &[PatchResult],
    exact: &Manufactured,
    points: Option<usize>,
) -> Result<ErrorNorms> {
    let n = disc.num_patches();
    if patches.len() != n || geometries.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: patches.len().min(geometries.len()) });
    }
    let nq = points.unwrap_or(disc.degree() + 3);
    let dim = disc.dim();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (k, res) in patches.iter().enumerate() {
        let basis = &disc.bases[k];
        let geo = &geometries[k];
        let alpha = exact.alpha(k);
        let coeffs = &res.extended[..disc.layouts[k].n_own];
        let bps: Vec<Vec<f64>> = basis.directions().iter().map(|kv| kv.breakpoints()).collect();
        for_each_element(&bps, |lo, hi| {
            let (pts, wts) = crate::assembly::element_rule(lo, hi, nq);
            for (xi, wq) in pts.iter().zip(wts) {
                let m = geo.eval(xi)?;
                let e = basis.eval(xi)?;
                let inv_t = m.inverse_transpose(dim);
                let mut uh = 0.0;
                let mut gh = [0.0; 3];
                for (a, &i) in e.indices.iter().enumerate() {
                    uh += coeffs[i] * e.values[a];
                    let g = MapEval::push_gradient(&inv_t, &e.grads[a], dim);
                    for d in 0..dim {
                        gh[d] += coeffs[i] * g[d];
                    }
                }
                let w = wq * m.det.abs();
                let ge = exact.gradient(&m.x);
                l2 += w * (exact.exact(&m.x) - uh).powi(2);
                h1 += w * alpha * (0..dim).map(|d| (ge[d] - gh[d]).powi(2)).sum::<f64>();
            }
            Ok(())
        })?;
    }
    let dg = (disc.formulation == Formulation::Dg).then(|| (h1 + patches.iter().map(|p| p.penalty_energy).sum::<f64>()).sqrt());
    Ok(ErrorNorms { l2: l2.sqrt(), h1_semi: h1.sqrt(), dg })
}
